//! Conditional DCGAN: models, training loop, checkpoints and generation.

mod config;
mod model;
mod train;

use std::path::Path;

use interlerp_nn::{Layer, Tensor};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use config::GanConfig;
pub use model::{build_discriminator, build_generator, discriminator_loss, Discriminator, Generator};
pub use train::{train, Progress, ProgressSink};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::{ConditioningVector, LabelMap};
use crate::rng::{domain, substream};
use crate::weights::WeightFile;

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOSSES_FILE: &str = "losses.csv";
pub const NOISE_DISTRIBUTION: &str = "standard_normal";

/// Images generated per network call when batching.
const GENERATION_CHUNK: usize = 64;

/// One latent noise vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseVector(Vec<f32>);

impl NoiseVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("noise vector must be nonempty and finite".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `count` standard-normal noise vectors; vector `i` comes from its own
/// substream of `seed`, so any index is reproducible on its own.
pub fn sample_noise(seed: u64, count: usize, z_dim: usize) -> Vec<NoiseVector> {
    (0..count).map(|i| noise_at(seed, i as u64, z_dim)).collect()
}

/// Vector `index` of the [`sample_noise`] sequence.
pub fn noise_at(seed: u64, index: u64, z_dim: usize) -> NoiseVector {
    let mut rng = substream(seed, &[domain::NOISE, index]);
    NoiseVector((0..z_dim).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng) as f32).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingStatus {
    Complete,
    Diverged,
    /// Built from a config without training.
    Untrained,
}

/// `manifest.json` of a generator checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanManifest {
    pub config: GanConfig,
    pub label_map: LabelMap,
    pub batches_completed: u64,
    /// Losses of the last batch whose losses were finite.
    pub loss_final_g: Option<f64>,
    pub loss_final_d: Option<f64>,
    pub noise_distribution: String,
    pub code_version: String,
    pub status: TrainingStatus,
    #[serde(default)]
    pub dataset_fingerprint: Option<String>,
    /// SHA-256 of `weights.bin`, filled in on save.
    #[serde(default)]
    pub weights_sha256: String,
}

/// A generator (and its discriminator) plus provenance.
pub struct GeneratorCheckpoint {
    pub manifest: GanManifest,
    generator: Generator<f32>,
    discriminator: Discriminator<f32>,
}

impl GeneratorCheckpoint {
    /// Freshly initialised networks for `config`.
    pub fn untrained(config: &GanConfig, label_map: LabelMap) -> Result<Self> {
        config.validate()?;
        if label_map.len() != config.n_classes {
            return Err(Error::Consistency(format!("{} labels for {} classes", label_map.len(), config.n_classes)));
        }
        Ok(Self {
            manifest: GanManifest {
                config: config.clone(),
                label_map,
                batches_completed: 0,
                loss_final_g: None,
                loss_final_d: None,
                noise_distribution: NOISE_DISTRIBUTION.into(),
                code_version: crate::CODE_VERSION.into(),
                status: TrainingStatus::Untrained,
                dataset_fingerprint: None,
                weights_sha256: String::new(),
            },
            generator: build_generator(config),
            discriminator: build_discriminator(config),
        })
    }

    pub(crate) fn from_parts(manifest: GanManifest, generator: Generator<f32>, discriminator: Discriminator<f32>) -> Self {
        Self { manifest, generator, discriminator }
    }

    pub fn config(&self) -> &GanConfig {
        &self.manifest.config
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.manifest.label_map
    }

    pub fn generator(&self) -> &Generator<f32> {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator<f32> {
        &self.discriminator
    }

    /// Identifies the weights: SHA-256 of the serialised parameters.
    pub fn fingerprint(&self) -> String {
        if self.manifest.weights_sha256.is_empty() {
            let mut h = Vec::new();
            for s in self.generator.net().state().into_iter().chain(self.discriminator.net().state()) {
                h.extend(s.iter().flat_map(|v| v.to_le_bytes()));
            }
            crate::sha256_hex(&h)
        } else {
            self.manifest.weights_sha256.clone()
        }
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        let mut wf = WeightFile::new();
        wf.push_state("generator", self.generator.net());
        wf.push_state("discriminator", self.discriminator.net());
        let wpath = dir.join(WEIGHTS_FILE);
        wf.write(&wpath)?;
        self.manifest.weights_sha256 = crate::sha256_file(&wpath)?;
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(dir.join(MANIFEST_FILE), text).map_err(Error::io("writing generator manifest"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&mpath).map_err(Error::io(format!("reading {}", mpath.display())))?;
        let manifest: GanManifest = serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
        manifest.config.validate()?;
        if manifest.label_map.len() != manifest.config.n_classes {
            return Err(Error::Consistency(format!(
                "manifest label map has {} classes, config {}",
                manifest.label_map.len(),
                manifest.config.n_classes
            )));
        }
        let wpath = dir.join(WEIGHTS_FILE);
        let actual = crate::sha256_file(&wpath)?;
        if !manifest.weights_sha256.is_empty() && actual != manifest.weights_sha256 {
            return Err(Error::Integrity { path: wpath, expected: manifest.weights_sha256, actual, quarantined: None });
        }
        let wf = WeightFile::read(&wpath)?;
        let mut generator = build_generator::<f32>(&manifest.config);
        let mut discriminator = build_discriminator::<f32>(&manifest.config);
        wf.load_state("generator", generator.net_mut())?;
        wf.load_state("discriminator", discriminator.net_mut())?;
        Ok(Self { manifest, generator, discriminator })
    }

    fn check_noise(&self, z: &NoiseVector) -> Result<()> {
        if z.len() != self.manifest.config.z_dim {
            return Err(Error::Shape(format!("noise of length {}, generator expects {}", z.len(), self.manifest.config.z_dim)));
        }
        Ok(())
    }

    fn check_condition(&self, v: &[f64]) -> Result<ConditioningVector> {
        if v.len() != self.manifest.config.n_classes {
            return Err(Error::Shape(format!("conditioning width {}, generator expects {}", v.len(), self.manifest.config.n_classes)));
        }
        ConditioningVector::new(v.to_vec())
    }

    /// One image for noise `z` and conditioning `v`.
    pub fn generate(&self, z: &NoiseVector, v: &[f64]) -> Result<ImageTensor> {
        let v = self.check_condition(v)?;
        self.generate_batch(std::slice::from_ref(z), std::slice::from_ref(&v)).map(|mut out| out.remove(0))
    }

    /// Pairs `zs[i]` with `vs[i]`; results are in input order.
    pub fn generate_batch(&self, zs: &[NoiseVector], vs: &[ConditioningVector]) -> Result<Vec<ImageTensor>> {
        if zs.len() != vs.len() {
            return Err(Error::Shape(format!("{} noise vectors for {} conditions", zs.len(), vs.len())));
        }
        let cfg = &self.manifest.config;
        let [h, w, c] = cfg.image_shape;
        let mut out = Vec::with_capacity(zs.len());
        for (zc, vc) in zs.chunks(GENERATION_CHUNK).zip(vs.chunks(GENERATION_CHUNK)) {
            let mut zdata = Vec::with_capacity(zc.len() * cfg.z_dim);
            let mut vdata = Vec::with_capacity(zc.len() * cfg.n_classes);
            for (z, v) in zc.iter().zip(vc) {
                self.check_noise(z)?;
                self.check_condition(v.values())?;
                zdata.extend_from_slice(z.values());
                vdata.extend(v.values().iter().map(|&x| x as f32));
            }
            let z = Tensor::from_vec(&[zc.len(), cfg.z_dim], zdata);
            let v = Tensor::from_vec(&[zc.len(), cfg.n_classes], vdata);
            let imgs = self.generator.infer(&z, &v)?;
            for i in 0..zc.len() {
                out.push(ImageTensor::new(h, w, c, imgs.item(i).to_vec())?);
            }
        }
        Ok(out)
    }

    /// Real-vs-fake logit of the trained discriminator.
    pub fn discriminate(&self, image: &ImageTensor, v: &[f64]) -> Result<f64> {
        let v = self.check_condition(v)?;
        let (h, w, c) = image.shape();
        let x = Tensor::from_vec(&[1, c, h, w], image.data().to_vec());
        let vt = Tensor::from_vec(&[1, v.len()], v.values().iter().map(|&x| x as f32).collect());
        Ok(self.discriminator.infer(&x, &vt)?.data()[0] as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_space::one_hot;

    fn toy() -> GeneratorCheckpoint {
        let cfg = GanConfig { z_dim: 8, base_channels: 4, ..GanConfig::new(3, [8, 8, 1], 1e-3, 1) };
        GeneratorCheckpoint::untrained(&cfg, LabelMap::new(vec!["a".into(), "b".into(), "c".into()]).unwrap()).unwrap()
    }

    #[test]
    fn noise_substreams() {
        assert_eq!(sample_noise(7, 3, 100), sample_noise(7, 3, 100));
        assert_eq!(sample_noise(7, 2, 100)[1], sample_noise(7, 1000, 100)[1]);
        let all = sample_noise(7, 1000, 100);
        let mean = all.iter().flat_map(|z| z.values()).map(|&v| v as f64).sum::<f64>() / 100_000.0;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn generate_contract() {
        let ck = toy();
        let z = &sample_noise(1, 1, 8)[0];
        let a = ck.generate(z, one_hot(1, 3).unwrap().values()).unwrap();
        let b = ck.generate(z, one_hot(1, 3).unwrap().values()).unwrap();
        assert_eq!(a, b);
        assert!(ck.generate(z, &[0.5, 0.5, 0.0]).is_ok());
        assert!(matches!(ck.generate(z, &[0.7, 0.7, 0.0]), Err(Error::Validation(_))));
        assert!(matches!(ck.generate(z, &[1.0, 0.0]), Err(Error::Shape(_))));
        assert!(matches!(ck.generate(&sample_noise(1, 1, 5)[0], &[1.0, 0.0, 0.0]), Err(Error::Shape(_))));
        assert!(ck.discriminate(&a, &[0.0, 0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn batch_matches_single() {
        let ck = toy();
        let zs = sample_noise(3, 70, 8);
        let vs: Vec<_> = (0..70).map(|i| one_hot(i % 3, 3).unwrap()).collect();
        let batch = ck.generate_batch(&zs, &vs).unwrap();
        for i in [0, 5, 64, 69] {
            assert_eq!(batch[i], ck.generate(&zs[i], vs[i].values()).unwrap());
        }
    }

    #[test]
    fn save_load_round_trip() {
        let mut ck = toy();
        let d = tempfile::tempdir().unwrap();
        ck.save(d.path()).unwrap();
        let back = GeneratorCheckpoint::load(d.path()).unwrap();
        let z = &sample_noise(9, 1, 8)[0];
        let v = [0.3, 0.7, 0.0];
        assert_eq!(ck.generate(z, &v).unwrap(), back.generate(z, &v).unwrap());
        assert_eq!(back.fingerprint(), ck.manifest.weights_sha256);

        std::fs::write(d.path().join(WEIGHTS_FILE), b"ILRPWT01\0\0\0\0").unwrap();
        assert!(matches!(GeneratorCheckpoint::load(d.path()), Err(Error::Integrity { .. })));
    }
}
