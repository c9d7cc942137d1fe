//! Procedural face glyphs with known (valence, arousal).
//!
//! Every sample picks an emotion uniformly, draws its (valence, arousal)
//! around that emotion's centroid, and renders a grayscale face whose mouth
//! curvature is an affine function of valence and whose eye height is an
//! affine function of arousal. Face position and size are jittered per sample.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledImageSet, Split, VAAnnotatedSet};
use crate::error::{Error, Result};
use crate::image::{denormalize, normalize, ImageTensor};
use crate::label_space::LabelMap;
use crate::rng::{domain, substream};

pub const NEUTRAL: &str = "neutral";

const BACKGROUND: f32 = -1.0;
const SKIN: f32 = 0.4;
const FEATURE: f32 = -0.8;
const SUPERSAMPLE: usize = 4;

// Glyph geometry, in units of the face scale relative to the image side.
const FACE_RX: f64 = 0.34;
const FACE_RY: f64 = 0.40;
const EYE_DX: f64 = 0.14;
const EYE_DY: f64 = -0.12;
const EYE_RX: f64 = 0.07;
const EYE_RY_MIN: f64 = 0.02;
const EYE_RY_GAIN: f64 = 0.06;
const MOUTH_DY: f64 = 0.20;
const MOUTH_HALF_WIDTH: f64 = 0.18;
const MOUTH_HALF_THICKNESS: f64 = 0.035;
const MOUTH_CURVATURE_GAIN: f64 = 5.0;

/// Rejection-sampling budget per sample before giving up on a centroid.
const MAX_DRAWS: usize = 10_000;

/// Ranges for the per-sample geometry jitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceJitter {
    /// Maximum centre offset along each axis, as a fraction of the image side.
    pub max_shift: f64,
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for FaceJitter {
    fn default() -> Self {
        Self { max_shift: 0.04, min_scale: 0.9, max_scale: 1.1 }
    }
}

/// Concrete placement of one face: centre offset and scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceGeometry {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Default for FaceGeometry {
    fn default() -> Self {
        Self { dx: 0.0, dy: 0.0, scale: 1.0 }
    }
}

impl FaceGeometry {
    /// Image rows (inclusive range) that the mouth can touch for any valence.
    pub fn mouth_rows(&self, size: usize) -> (usize, usize) {
        let cy = 0.5 + self.dy + MOUTH_DY * self.scale;
        // the corners sit furthest from the mean height, at either sign of valence
        let bend = MOUTH_CURVATURE_GAIN * 2.0 * MOUTH_HALF_WIDTH.powi(2) / 3.0;
        let max_slope = 2.0 * MOUTH_CURVATURE_GAIN * MOUTH_HALF_WIDTH;
        let reach = MOUTH_HALF_THICKNESS * (1.0 + max_slope * max_slope).sqrt();
        let top = cy - (bend + reach) * self.scale;
        let bottom = cy + (bend + reach) * self.scale;
        let s = size as f64;
        ((top * s - 0.5).floor().max(0.0) as usize, ((bottom * s).ceil() as usize).min(size - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFaceSpec {
    pub n_samples: usize,
    #[serde(default = "default_size")]
    pub image_size: usize,
    #[serde(default = "default_centroids")]
    pub centroids: BTreeMap<String, (f64, f64)>,
    #[serde(default = "default_spread")]
    pub centroid_spread: f64,
    #[serde(default)]
    pub jitter: FaceJitter,
    #[serde(default)]
    pub seed: u64,
}

fn default_size() -> usize {
    64
}

fn default_spread() -> f64 {
    0.12
}

pub fn default_centroids() -> BTreeMap<String, (f64, f64)> {
    [
        ("happiness", (0.8, 0.5)),
        ("sadness", (-0.7, -0.4)),
        ("anger", (-0.6, 0.8)),
        ("fear", (-0.5, 0.7)),
        ("disgust", (-0.7, 0.3)),
        (NEUTRAL, (0.0, 0.0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

impl SyntheticFaceSpec {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            image_size: default_size(),
            centroids: default_centroids(),
            centroid_spread: default_spread(),
            jitter: FaceJitter::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Data("n_samples must be at least 1".into()));
        }
        if self.image_size < 8 {
            return Err(Error::Data(format!("image_size {} is too small to draw a face", self.image_size)));
        }
        if self.centroids.len() < 2 {
            return Err(Error::Data("at least two emotion centroids are required".into()));
        }
        match self.centroids.get(NEUTRAL) {
            Some(&(v, a)) if v == 0.0 && a == 0.0 => {}
            Some(c) => return Err(Error::Data(format!("neutral centroid must be (0, 0), got {c:?}"))),
            None => return Err(Error::Data("a 'neutral' centroid is required".into())),
        }
        for (name, &(v, a)) in &self.centroids {
            if !((-1.0..=1.0).contains(&v) && (-1.0..=1.0).contains(&a)) {
                return Err(Error::Data(format!("centroid {name} = ({v}, {a}) outside [-1, 1]^2")));
            }
        }
        if !(self.centroid_spread > 0.0 && self.centroid_spread.is_finite()) {
            return Err(Error::Data(format!("centroid_spread must be positive, got {}", self.centroid_spread)));
        }
        let j = &self.jitter;
        if !(j.max_shift >= 0.0 && j.max_shift <= 0.1 && j.min_scale > 0.5 && j.min_scale <= j.max_scale && j.max_scale <= 1.15) {
            return Err(Error::Data(format!("jitter {j:?} would push the face outside the frame")));
        }
        Ok(())
    }

    pub fn label_map(&self) -> Result<LabelMap> {
        LabelMap::new(self.centroids.keys().cloned().collect())
    }
}

fn nearest(centroids: &[(f64, f64)], p: (f64, f64)) -> usize {
    let d = |c: &(f64, f64)| (c.0 - p.0).powi(2) + (c.1 - p.1).powi(2);
    (0..centroids.len()).min_by(|&a, &b| d(&centroids[a]).total_cmp(&d(&centroids[b]))).expect("nonempty")
}

/// Draws one (valence, arousal) near `centroids[k]`: a Gaussian restricted to
/// `[-1, 1]^2`, to within three spreads of the centroid, and to the region
/// strictly closer to this centroid than to any other.
fn draw_va(rng: &mut impl Rng, centroids: &[(f64, f64)], k: usize, spread: f64) -> Result<(f64, f64)> {
    let (cv, ca) = centroids[k];
    let d2 = |p: (f64, f64), c: (f64, f64)| (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2);
    for _ in 0..MAX_DRAWS {
        let v = cv + spread * Distribution::<f64>::sample(&StandardNormal, rng);
        let a = ca + spread * Distribution::<f64>::sample(&StandardNormal, rng);
        let p = (v, a);
        let inside = (-1.0..=1.0).contains(&v) && (-1.0..=1.0).contains(&a);
        let own = d2(p, centroids[k]);
        let closest = centroids.iter().enumerate().all(|(j, &c)| j == k || d2(p, c) > own);
        if inside && own <= (3.0 * spread).powi(2) && closest {
            return Ok(p);
        }
    }
    Err(Error::Data(format!("could not draw a sample for centroid {k} in {MAX_DRAWS} tries")))
}

fn draw_geometry(rng: &mut impl Rng, j: &FaceJitter) -> FaceGeometry {
    let dx = if j.max_shift > 0.0 { rng.random_range(-j.max_shift..=j.max_shift) } else { 0.0 };
    let dy = if j.max_shift > 0.0 { rng.random_range(-j.max_shift..=j.max_shift) } else { 0.0 };
    let scale = if j.max_scale > j.min_scale { rng.random_range(j.min_scale..=j.max_scale) } else { j.min_scale };
    FaceGeometry { dx, dy, scale }
}

/// Intensity of the glyph at normalised point `(x, y)` (both in `[0, 1]`).
fn shade(x: f64, y: f64, va: (f64, f64), g: &FaceGeometry) -> f32 {
    let (cx, cy, s) = (0.5 + g.dx, 0.5 + g.dy, g.scale);
    let (fx, fy) = ((x - cx) / (FACE_RX * s), (y - cy) / (FACE_RY * s));
    if fx * fx + fy * fy > 1.0 {
        return BACKGROUND;
    }
    // Work in face-local units from here on.
    let (lx, ly) = ((x - cx) / s, (y - cy) / s);

    let eye_ry = EYE_RY_MIN + EYE_RY_GAIN * (va.1 + 1.0) / 2.0;
    for side in [-1.0, 1.0] {
        let (ex, ey) = ((lx - side * EYE_DX) / EYE_RX, (ly - EYE_DY) / eye_ry);
        if ex * ex + ey * ey <= 1.0 {
            return FEATURE;
        }
    }

    let mx = lx;
    if mx.abs() <= MOUTH_HALF_WIDTH {
        // Curve centred on its mean height so valence never moves the mouth as a whole.
        let k = MOUTH_CURVATURE_GAIN * va.0;
        let curve = MOUTH_DY - k * (mx * mx - MOUTH_HALF_WIDTH * MOUTH_HALF_WIDTH / 3.0);
        let slope = -2.0 * k * mx;
        if (ly - curve).abs() / (1.0 + slope * slope).sqrt() <= MOUTH_HALF_THICKNESS {
            return FEATURE;
        }
    }
    SKIN
}

/// Renders one `size x size` grayscale face. Output pixels lie on the 8-bit
/// grid so the image survives a PNG round trip unchanged.
pub fn render_face(va: (f64, f64), geometry: &FaceGeometry, size: usize) -> ImageTensor {
    let mut data = Vec::with_capacity(size * size);
    let n = (size * SUPERSAMPLE) as f64;
    for row in 0..size {
        for col in 0..size {
            let mut acc = 0.0f32;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = ((col * SUPERSAMPLE + sx) as f64 + 0.5) / n;
                    let y = ((row * SUPERSAMPLE + sy) as f64 + 0.5) / n;
                    acc += shade(x, y, va, geometry);
                }
            }
            data.push(normalize(denormalize(acc / (SUPERSAMPLE * SUPERSAMPLE) as f32)));
        }
    }
    ImageTensor::new(size, size, 1, data).expect("shaded values are in range")
}

/// Per-sample draws, exposed for tests and tooling.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceSample {
    pub label: usize,
    pub va: (f64, f64),
    pub geometry: FaceGeometry,
}

pub fn draw_sample(spec: &SyntheticFaceSpec, index: usize) -> Result<FaceSample> {
    let centroids: Vec<(f64, f64)> = spec.centroids.values().copied().collect();
    let mut rng = substream(spec.seed, &[domain::SYNTH, index as u64]);
    let label = rng.random_range(0..centroids.len());
    let va = draw_va(&mut rng, &centroids, label, spec.centroid_spread)?;
    let geometry = draw_geometry(&mut rng, &spec.jitter);
    debug_assert_eq!(nearest(&centroids, va), label);
    Ok(FaceSample { label, va, geometry })
}

/// Generates the synthetic set. Identical specs give bit-identical output.
pub fn synth_faces(spec: &SyntheticFaceSpec) -> Result<VAAnnotatedSet> {
    spec.validate()?;
    let mut images = Vec::with_capacity(spec.n_samples);
    let mut labels = Vec::with_capacity(spec.n_samples);
    let mut va = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let s = draw_sample(spec, i)?;
        images.push(render_face(s.va, &s.geometry, spec.image_size));
        labels.push(s.label);
        va.push(s.va);
    }
    VAAnnotatedSet::new(LabeledImageSet::new(images, labels, spec.label_map()?, Split::Train)?, va)
}

#[derive(Debug, Serialize, Deserialize)]
struct VaRow {
    filename: String,
    valence: f64,
    arousal: f64,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SynthManifest {
    spec: Option<SyntheticFaceSpec>,
    label_map: LabelMap,
    n_samples: usize,
}

/// Writes `<label>/<NNNNN>.png`, `va.csv` and `manifest.json` under `dir`.
pub fn save_synth_faces(set: &VAAnnotatedSet, spec: Option<&SyntheticFaceSpec>, dir: &Path) -> Result<()> {
    let lm = set.set.label_map();
    for name in lm.names() {
        std::fs::create_dir_all(dir.join(name)).map_err(Error::io(format!("creating {}", dir.join(name).display())))?;
    }
    let mut w = csv::Writer::from_path(dir.join("va.csv"))?;
    for (i, ((img, &label), &(valence, arousal))) in set.set.images().iter().zip(set.set.labels()).zip(set.va()).enumerate() {
        let name = lm.name(label).expect("validated label");
        let filename = format!("{name}/{i:05}.png");
        img.save_png(&dir.join(&filename))?;
        w.serialize(VaRow { filename, valence, arousal, label: name.to_owned() })?;
    }
    w.flush().map_err(Error::io("writing va.csv"))?;
    let manifest = SynthManifest { spec: spec.cloned(), label_map: lm.clone(), n_samples: set.len() };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), text).map_err(Error::io("writing manifest.json"))?;
    Ok(())
}

/// Reads a directory written by [`save_synth_faces`] (or any folder with a
/// matching `va.csv`). Without a manifest, classes are the sorted label names.
pub fn load_synth_faces(dir: &Path) -> Result<VAAnnotatedSet> {
    let csv_path = dir.join("va.csv");
    if !csv_path.is_file() {
        return Err(Error::Data(format!("{} not found", csv_path.display())));
    }
    let rows: Vec<VaRow> = csv::Reader::from_path(&csv_path)?.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{} has no rows", csv_path.display())));
    }
    let manifest_path = dir.join("manifest.json");
    let label_map = if manifest_path.is_file() {
        let text = std::fs::read_to_string(&manifest_path).map_err(Error::io("reading manifest.json"))?;
        serde_json::from_str::<SynthManifest>(&text)?.label_map
    } else {
        let names: std::collections::BTreeSet<String> = rows.iter().map(|r| r.label.clone()).collect();
        LabelMap::new(names.into_iter().collect())?
    };
    let mut images = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut va = Vec::with_capacity(rows.len());
    for r in rows {
        let path = dir.join(&r.filename);
        let img = image::open(&path).map_err(|e| Error::format(&path, e.to_string()))?;
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        images.push(ImageTensor::from_planar_bytes(h as usize, w as usize, 1, luma.as_raw())?);
        labels.push(label_map.index(&r.label).ok_or_else(|| Error::Data(format!("unknown label {:?}", r.label)))?);
        va.push((r.valence, r.arousal));
    }
    VAAnnotatedSet::new(LabeledImageSet::new(images, labels, label_map, Split::Train)?, va)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_identical_spec() {
        let mut spec = SyntheticFaceSpec::new(10, 7);
        spec.image_size = 32;
        assert_eq!(synth_faces(&spec).unwrap(), synth_faces(&spec).unwrap());
        spec.seed = 8;
        assert_ne!(synth_faces(&spec).unwrap().va(), synth_faces(&SyntheticFaceSpec { seed: 7, ..spec.clone() }).unwrap().va());
    }

    #[test]
    fn samples_are_truncated_and_nearest_to_their_centroid() {
        let spec = SyntheticFaceSpec::new(1000, 3);
        let centroids: Vec<(f64, f64)> = spec.centroids.values().copied().collect();
        let mut seen = vec![0; centroids.len()];
        for i in 0..spec.n_samples {
            let s = draw_sample(&spec, i).unwrap();
            let (c, p) = (centroids[s.label], s.va);
            assert!((-1.0..=1.0).contains(&p.0) && (-1.0..=1.0).contains(&p.1));
            assert!(((c.0 - p.0).powi(2) + (c.1 - p.1).powi(2)).sqrt() <= 3.0 * spec.centroid_spread);
            assert_eq!(nearest(&centroids, p), s.label);
            seen[s.label] += 1;
        }
        assert!(seen.iter().all(|&k| k > 100), "{seen:?}");
    }

    #[test]
    fn valence_only_changes_mouth_rows() {
        for g in
            [FaceGeometry::default(), FaceGeometry { dx: 0.04, dy: -0.04, scale: 1.1 }, FaceGeometry { dx: -0.03, dy: 0.04, scale: 0.9 }]
        {
            let size = 64;
            let hi = render_face((1.0, 0.3), &g, size);
            let lo = render_face((-1.0, 0.3), &g, size);
            let (top, bottom) = g.mouth_rows(size);
            let mut changed = 0;
            for row in 0..size {
                for col in 0..size {
                    if hi.pixel(row, col, 0) != lo.pixel(row, col, 0) {
                        assert!((top..=bottom).contains(&row), "row {row} outside mouth band {top}..={bottom}");
                        changed += 1;
                    }
                }
            }
            assert!(changed > 0);
        }
    }

    #[test]
    fn arousal_changes_eyes_not_mouth() {
        let g = FaceGeometry::default();
        let a = render_face((0.2, -1.0), &g, 64);
        let b = render_face((0.2, 1.0), &g, 64);
        let (top, bottom) = g.mouth_rows(64);
        let mut changed = 0;
        for row in 0..64 {
            for col in 0..64 {
                if a.pixel(row, col, 0) != b.pixel(row, col, 0) {
                    assert!(row < top || row > bottom);
                    changed += 1;
                }
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(synth_faces(&SyntheticFaceSpec::new(0, 1)), Err(Error::Data(_))));
        let mut s = SyntheticFaceSpec::new(5, 1);
        s.centroids.insert(NEUTRAL.into(), (0.1, 0.0));
        assert!(s.validate().is_err());
        let mut s = SyntheticFaceSpec::new(5, 1);
        s.centroids.insert("elation".into(), (1.3, 0.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let mut spec = SyntheticFaceSpec::new(12, 5);
        spec.image_size = 16;
        let set = synth_faces(&spec).unwrap();
        let d = tempfile::tempdir().unwrap();
        save_synth_faces(&set, Some(&spec), d.path()).unwrap();
        let back = load_synth_faces(d.path()).unwrap();
        assert_eq!(back, set);
        let text = std::fs::read_to_string(d.path().join("va.csv")).unwrap();
        assert!(text.starts_with("filename,valence,arousal,label\n"));
    }
}
