//! Interpolation sweeps scored by a judge: class-pair confidence
//! trajectories and neutral-anchored valence/arousal trajectories.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cgan::{sample_noise, GeneratorCheckpoint, NoiseVector};
use crate::error::{Error, Result};
use crate::judges::{JudgeCheckpoint, JudgeKind};
use crate::label_space::{build_schedule, one_hot, transfer_mass, ClassIndex, ConditioningVector, LabelMap};
use crate::rng::{derive, domain};

pub const CONFIDENCE_CSV: &str = "confidence_sweep.csv";
pub const VA_CSV: &str = "va_sweep.csv";
pub const MANIFEST_FILE: &str = "sweep_manifest.json";

/// Which (source, target) pairs to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    /// `"all"`: every ordered pair of distinct classes.
    All(AllPairs),
    Explicit(Vec<(usize, usize)>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllPairs {
    All,
}

impl Default for PairSelection {
    fn default() -> Self {
        PairSelection::All(AllPairs::All)
    }
}

impl PairSelection {
    pub fn all() -> Self {
        Self::default()
    }

    /// Ordered pairs for `n` classes, source-major.
    pub fn resolve(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairSelection::All(_) => (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect(),
            PairSelection::Explicit(p) => p.clone(),
        }
    }
}

fn default_n_samples() -> usize {
    1000
}
fn default_step_size() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub pairs: PairSelection,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { pairs: PairSelection::all(), n_samples: default_n_samples(), step_size: default_step_size(), seed: 0 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Data("sweep needs at least one sample".into()));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidStepSize(self.step_size));
        }
        Ok(())
    }

    /// Noise population for trajectories starting at `source`. Pairs that
    /// share a source share their noise, so their step-0 statistics agree.
    pub fn noise_for_source(&self, source: usize, z_dim: usize) -> Vec<NoiseVector> {
        sample_noise(derive(self.seed, &[domain::SWEEP, source as u64]), self.n_samples, z_dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Confidence,
    Va,
}

/// Aggregates at one conditioning point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    /// Mass on the target class.
    pub e: f64,
    /// One entry per class (confidence sweep) or `[valence, arousal]`.
    pub mean: Vec<f64>,
    /// Population standard deviation, same layout as `mean`.
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub kind: SweepKind,
    pub source: ClassIndex,
    pub target: ClassIndex,
    pub n_samples: usize,
    pub steps: Vec<StepSummary>,
}

impl TrajectoryStats {
    /// Mean of output element `index` at every step.
    pub fn mean_series(&self, index: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.mean[index]).collect()
    }
}

/// One generated image, reported before it is judged.
#[derive(Debug)]
pub struct GenerationEvent<'a> {
    pub source: usize,
    pub target: usize,
    pub step: usize,
    pub sample: usize,
    pub noise: &'a NoiseVector,
    pub condition: &'a ConditioningVector,
}

pub trait SweepObserver {
    fn on_generate(&mut self, event: &GenerationEvent<'_>);
}

impl<F: FnMut(&GenerationEvent<'_>)> SweepObserver for F {
    fn on_generate(&mut self, event: &GenerationEvent<'_>) {
        self(event)
    }
}

struct Silent;

impl SweepObserver for Silent {
    fn on_generate(&mut self, _: &GenerationEvent<'_>) {}
}

fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let width = rows[0].len();
    let mean: Vec<f64> = (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..width).map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt()).collect();
    (mean, std)
}

/// Generates every (noise, step) image of one schedule and reduces the
/// judge outputs per step.
fn trajectory(
    gan: &GeneratorCheckpoint,
    spec: &SweepSpec,
    (source, target): (usize, usize),
    noise_key: usize,
    kind: SweepKind,
    judge: &mut dyn FnMut(&[crate::ImageTensor]) -> Result<Vec<Vec<f64>>>,
    observer: &mut dyn SweepObserver,
) -> Result<TrajectoryStats> {
    let lm = gan.label_map();
    let schedule = build_schedule(source, target, spec.step_size, lm.len())?;
    let zs = spec.noise_for_source(noise_key, gan.config().z_dim);
    let mut steps = Vec::with_capacity(schedule.len());
    for (s, v) in schedule.steps.iter().enumerate() {
        for (k, z) in zs.iter().enumerate() {
            observer.on_generate(&GenerationEvent { source, target, step: s, sample: k, noise: z, condition: v });
        }
        let images = gan.generate_batch(&zs, &vec![v.clone(); zs.len()])?;
        let (mean, std) = mean_std(&judge(&images)?);
        steps.push(StepSummary { step: s, e: v.get(target), mean, std });
    }
    Ok(TrajectoryStats { kind, source: lm.class(source)?, target: lm.class(target)?, n_samples: spec.n_samples, steps })
}

/// Confidence trajectories for every selected pair.
pub fn run_confidence_sweep(gan: &GeneratorCheckpoint, judge: &JudgeCheckpoint, spec: &SweepSpec) -> Result<Vec<TrajectoryStats>> {
    run_confidence_sweep_observed(gan, judge, spec, &mut Silent)
}

/// [`run_confidence_sweep`] reporting each generation to `observer`.
pub fn run_confidence_sweep_observed(
    gan: &GeneratorCheckpoint,
    judge: &JudgeCheckpoint,
    spec: &SweepSpec,
    observer: &mut dyn SweepObserver,
) -> Result<Vec<TrajectoryStats>> {
    spec.validate()?;
    if judge.kind() != JudgeKind::Classifier {
        return Err(Error::Kind { expected: JudgeKind::Classifier.name(), actual: judge.kind().name() });
    }
    if judge.label_map() != Some(gan.label_map()) {
        return Err(Error::Consistency("generator and judge use different label maps".into()));
    }
    let mut classify =
        |ims: &[crate::ImageTensor]| -> Result<Vec<Vec<f64>>> { Ok(judge.classify_batch(ims)?.into_iter().map(|c| c.probs).collect()) };
    spec.pairs
        .resolve(gan.label_map().len())
        .into_iter()
        .map(|pair| trajectory(gan, spec, pair, pair.0, SweepKind::Confidence, &mut classify, observer))
        .collect()
}

/// Emotion maximising each affect axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisMap {
    pub valence: String,
    pub arousal: String,
}

impl Default for AxisMap {
    fn default() -> Self {
        Self { valence: "happiness".into(), arousal: "anger".into() }
    }
}

impl AxisMap {
    /// Resolves both entries, rejecting unknown classes and `neutral`.
    pub fn resolve(&self, labels: &LabelMap, neutral: usize) -> Result<(ClassIndex, ClassIndex)> {
        let get = |name: &str| -> Result<ClassIndex> {
            let c = labels.resolve(name)?;
            if c.index == neutral {
                return Err(Error::Consistency(format!("axis maximiser {name:?} is the neutral class")));
            }
            Ok(c)
        };
        Ok((get(&self.valence)?, get(&self.arousal)?))
    }
}

/// Neutral-anchored conditioning that moves `amount` of mass toward the
/// emotion maximising `axis` (`"valence"` or `"arousal"`).
pub fn condition_for_axis(axes: &AxisMap, labels: &LabelMap, neutral: usize, axis: &str, amount: f64) -> Result<ConditioningVector> {
    let (v, a) = axes.resolve(labels, neutral)?;
    let target = match axis {
        "valence" => v.index,
        "arousal" => a.index,
        other => return Err(Error::Consistency(format!("unknown axis {other:?}"))),
    };
    let start = one_hot(neutral, labels.len())?;
    if amount == 0.0 {
        return Ok(start);
    }
    transfer_mass(&start, neutral, target, amount)
}

/// Neutral-to-emotion valence/arousal trajectories.
///
/// With [`PairSelection::All`] every class except `neutral` is a target.
/// Explicit pairs must start at `neutral`; a pair ending there is a
/// [`Error::DegenerateTransfer`]. All trajectories share one noise
/// population, drawn for the neutral class.
pub fn run_va_sweep(
    gan: &GeneratorCheckpoint,
    judge: &JudgeCheckpoint,
    spec: &SweepSpec,
    axes: &AxisMap,
    neutral: &ClassIndex,
) -> Result<Vec<TrajectoryStats>> {
    run_va_sweep_observed(gan, judge, spec, axes, neutral, &mut Silent)
}

pub fn run_va_sweep_observed(
    gan: &GeneratorCheckpoint,
    judge: &JudgeCheckpoint,
    spec: &SweepSpec,
    axes: &AxisMap,
    neutral: &ClassIndex,
    observer: &mut dyn SweepObserver,
) -> Result<Vec<TrajectoryStats>> {
    spec.validate()?;
    if judge.kind() != JudgeKind::Regressor {
        return Err(Error::Kind { expected: JudgeKind::Regressor.name(), actual: judge.kind().name() });
    }
    let lm = gan.label_map();
    if lm.class(neutral.index)? != *neutral {
        return Err(Error::Consistency(format!("{neutral:?} is not a class of the generator")));
    }
    axes.resolve(lm, neutral.index)?;
    let targets: Vec<usize> = match &spec.pairs {
        PairSelection::All(_) => (0..lm.len()).filter(|&i| i != neutral.index).collect(),
        PairSelection::Explicit(pairs) => pairs
            .iter()
            .map(|&(s, t)| {
                if t == neutral.index {
                    Err(Error::DegenerateTransfer(t))
                } else if s != neutral.index {
                    Err(Error::Consistency(format!("valence/arousal sweeps start at {:?}, not class {s}", neutral.label)))
                } else {
                    Ok(t)
                }
            })
            .collect::<Result<_>>()?,
    };
    let mut predict = |ims: &[crate::ImageTensor]| -> Result<Vec<Vec<f64>>> {
        Ok(judge.predict_va_batch(ims)?.into_iter().map(|p| vec![p.valence, p.arousal]).collect())
    };
    targets.into_iter().map(|t| trajectory(gan, spec, (neutral.index, t), neutral.index, SweepKind::Va, &mut predict, observer)).collect()
}

/// Writes trajectories as long-format CSV and returns the number of data
/// rows. Confidence sweeps produce one row per (step, class); VA sweeps one
/// row per step.
pub fn export_trajectories(stats: &[TrajectoryStats], dest: &Path) -> Result<usize> {
    let first = stats.first().ok_or_else(|| Error::EmptyInput("no trajectories to export".into()))?;
    if stats.iter().any(|s| s.kind != first.kind) {
        return Err(Error::Consistency("cannot mix confidence and VA trajectories in one file".into()));
    }
    let mut w = csv::Writer::from_path(dest).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { context: format!("creating {}", dest.display()), source },
        other => Error::Data(format!("{other:?}")),
    })?;
    let mut rows = 0;
    match first.kind {
        SweepKind::Confidence => {
            w.write_record(["source", "target", "step", "e", "class_index", "mean_confidence", "std_confidence"])?;
            for t in stats {
                for s in &t.steps {
                    for (c, (m, sd)) in s.mean.iter().zip(&s.std).enumerate() {
                        w.write_record([
                            t.source.index.to_string(),
                            t.target.index.to_string(),
                            s.step.to_string(),
                            s.e.to_string(),
                            c.to_string(),
                            m.to_string(),
                            sd.to_string(),
                        ])?;
                        rows += 1;
                    }
                }
            }
        }
        SweepKind::Va => {
            w.write_record(["emotion", "step", "e", "mean_valence", "std_valence", "mean_arousal", "std_arousal"])?;
            for t in stats {
                for s in &t.steps {
                    w.write_record([
                        t.target.label.clone(),
                        s.step.to_string(),
                        s.e.to_string(),
                        s.mean[0].to_string(),
                        s.std[0].to_string(),
                        s.mean[1].to_string(),
                        s.std[1].to_string(),
                    ])?;
                    rows += 1;
                }
            }
        }
    }
    w.flush().map_err(Error::io(format!("writing {}", dest.display())))?;
    Ok(rows)
}

/// Sidecar written next to sweep CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: SweepKind,
    pub spec: SweepSpec,
    pub gan_fingerprint: String,
    pub judge_fingerprint: String,
    pub label_map: LabelMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<AxisMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral: Option<String>,
    pub trajectories: usize,
    pub rows: usize,
    pub code_version: String,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(Error::io(format!("writing {}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_pairs() {
        let p = PairSelection::all().resolve(3);
        assert_eq!(p, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
        assert_eq!(PairSelection::all().resolve(10).len(), 90);
    }

    #[test]
    fn spec_json() {
        let s: SweepSpec = serde_json::from_str(r#"{"pairs": "all", "seed": 3}"#).unwrap();
        assert_eq!(s, SweepSpec { seed: 3, ..SweepSpec::default() });
        let s: SweepSpec = serde_json::from_str(r#"{"pairs": [[0, 5]], "n_samples": 10}"#).unwrap();
        assert_eq!(s.pairs, PairSelection::Explicit(vec![(0, 5)]));
        assert!(serde_json::from_str::<SweepSpec>(r#"{"pairs": "some"}"#).is_err());
        assert!(SweepSpec { n_samples: 0, ..SweepSpec::default() }.validate().is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(m, vec![2.0, 0.0]);
        assert_eq!(s, vec![1.0, 0.0]);
        assert_eq!(mean_std(&[vec![0.3]]).1, vec![0.0]);
    }

    #[test]
    fn axis_map_rejects_neutral() {
        let lm = LabelMap::from_sorted(["anger", "happiness", "neutral"].map(String::from).to_vec()).unwrap();
        let bad = AxisMap { valence: "neutral".into(), ..AxisMap::default() };
        assert!(bad.resolve(&lm, 2).is_err());
        let v = condition_for_axis(&AxisMap::default(), &lm, 2, "valence", 0.3).unwrap();
        assert_eq!(v.values(), &[0.0, 0.3, 0.7]);
    }
}
