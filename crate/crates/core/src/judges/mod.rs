//! Auxiliary judges: a softmax classifier and a bounded valence/arousal
//! regressor, trained on real data and used to measure generator output.

mod net;
mod train;

use std::path::Path;

use interlerp_nn::{Layer, Sequential, Tensor};
use serde::{Deserialize, Serialize};

pub use net::build_judge_net;
pub use train::{train_classifier, train_va_regressor};

use crate::datasets::{stack, LabeledImageSet, VAAnnotatedSet};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::LabelMap;
use crate::metrics::AxisMetrics;
use crate::weights::WeightFile;

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_REPORT_FILE: &str = "metrics_report.csv";
pub const AXES: [&str; 2] = ["valence", "arousal"];

const INFERENCE_CHUNK: usize = 128;

fn default_channels() -> Vec<usize> {
    vec![32, 64]
}
fn default_convs_per_block() -> usize {
    1
}
fn default_hidden() -> usize {
    128
}
fn default_batch_size() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_max_epochs() -> usize {
    10
}
fn default_true() -> bool {
    true
}

/// Judge architecture, optimisation and quality gate.
///
/// The network is a stack of convolution blocks (one block per entry of
/// `channels`, each ending in a stride-2 convolution), a hidden dense layer
/// and the task head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    #[serde(default = "default_channels")]
    pub channels: Vec<usize>,
    #[serde(default = "default_convs_per_block")]
    pub convs_per_block: usize,
    #[serde(default = "default_true")]
    pub batch_norm: bool,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Held-out accuracy (classifier) or per-axis CCC (regressor) the final
    /// checkpoint must reach.
    pub floor: f64,
    /// Stop as soon as the held-out score reaches this value.
    #[serde(default)]
    pub stop_at: Option<f64>,
    /// Random horizontal flips and shifted crops during training.
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub seed: u64,
    /// Free text copied into the manifest, e.g. why a floor was chosen.
    #[serde(default)]
    pub gate_note: Option<String>,
}

impl JudgeConfig {
    pub fn new(floor: f64) -> Self {
        Self {
            channels: default_channels(),
            convs_per_block: default_convs_per_block(),
            batch_norm: true,
            hidden: default_hidden(),
            batch_size: default_batch_size(),
            learning_rate: default_lr(),
            max_epochs: default_max_epochs(),
            floor,
            stop_at: None,
            augment: false,
            seed: 0,
            gate_note: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Data(format!("invalid judge config: {m}")));
        if self.channels.is_empty() || self.channels.contains(&0) {
            return bad("channels must be a nonempty list of positive widths");
        }
        if self.convs_per_block == 0 || self.hidden == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("convs_per_block, hidden, batch_size and max_epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !self.floor.is_finite() {
            return bad("floor must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Classifier,
    Regressor,
}

impl JudgeKind {
    pub fn name(self) -> &'static str {
        match self {
            JudgeKind::Classifier => "classifier",
            JudgeKind::Regressor => "regressor",
        }
    }
}

/// Softmax output over the classes of a classifier judge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceVector {
    pub probs: Vec<f64>,
}

impl ConfidenceVector {
    /// Softmax of raw logits, computed in f64.
    pub fn from_logits(logits: &[f32]) -> Self {
        let m = logits.iter().map(|&x| x as f64).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&x| (x as f64 - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        Self { probs: exps.into_iter().map(|e| e / z).collect() }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VAPoint {
    pub valence: f64,
    pub arousal: f64,
}

impl VAPoint {
    pub fn new(valence: f64, arousal: f64) -> Self {
        Self { valence: valence.clamp(-1.0, 1.0), arousal: arousal.clamp(-1.0, 1.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScores {
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum JudgeMetrics {
    Classifier(ClassifierScores),
    Regressor { axes: Vec<AxisMetrics> },
}

impl JudgeMetrics {
    /// The score compared with the gate floor.
    pub fn gate_value(&self) -> f64 {
        match self {
            JudgeMetrics::Classifier(s) => s.accuracy,
            JudgeMetrics::Regressor { axes } => axes.iter().map(|a| a.ccc).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn gate_metric(&self) -> &'static str {
        match self {
            JudgeMetrics::Classifier(_) => "accuracy",
            JudgeMetrics::Regressor { .. } => "min_axis_ccc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub metric: String,
    pub value: f64,
    pub floor: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeManifest {
    pub kind: JudgeKind,
    pub config: JudgeConfig,
    /// `[H, W, C]` of accepted images.
    pub input_shape: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map: Option<LabelMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<String>>,
    pub metrics: JudgeMetrics,
    pub gate: GateRecord,
    pub epochs_completed: usize,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub code_version: String,
    #[serde(default)]
    pub weights_sha256: String,
}

pub struct JudgeCheckpoint {
    pub manifest: JudgeManifest,
    net: Sequential<f32>,
}

impl std::fmt::Debug for JudgeCheckpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JudgeCheckpoint").field("manifest", &self.manifest).finish_non_exhaustive()
    }
}

impl JudgeCheckpoint {
    pub(crate) fn from_parts(manifest: JudgeManifest, net: Sequential<f32>) -> Self {
        Self { manifest, net }
    }

    pub fn kind(&self) -> JudgeKind {
        self.manifest.kind
    }

    pub fn fingerprint(&self) -> &str {
        &self.manifest.weights_sha256
    }

    pub fn label_map(&self) -> Option<&LabelMap> {
        self.manifest.label_map.as_ref()
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        let mut wf = WeightFile::new();
        wf.push_state("judge", &self.net);
        let wpath = dir.join(WEIGHTS_FILE);
        wf.write(&wpath)?;
        self.manifest.weights_sha256 = crate::sha256_file(&wpath)?;
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(dir.join(MANIFEST_FILE), text).map_err(Error::io("writing judge manifest"))?;
        if let JudgeMetrics::Regressor { axes } = &self.manifest.metrics {
            crate::metrics::write_metrics_report(axes, &dir.join(METRICS_REPORT_FILE))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&mpath).map_err(Error::io(format!("reading {}", mpath.display())))?;
        let manifest: JudgeManifest = serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
        let wpath = dir.join(WEIGHTS_FILE);
        let actual = crate::sha256_file(&wpath)?;
        if actual != manifest.weights_sha256 {
            return Err(Error::Integrity { path: wpath, expected: manifest.weights_sha256, actual, quarantined: None });
        }
        let mut net = build_judge_net(&manifest.config, manifest.input_shape, &head_of(&manifest)?);
        WeightFile::read(&wpath)?.load_state("judge", &mut net)?;
        Ok(Self { manifest, net })
    }

    fn expect(&self, kind: JudgeKind) -> Result<()> {
        if self.manifest.kind != kind {
            return Err(Error::Kind { expected: kind.name(), actual: self.manifest.kind.name() });
        }
        Ok(())
    }

    fn raw_outputs(&self, images: &[ImageTensor]) -> Result<Vec<Vec<f32>>> {
        let [h, w, c] = self.manifest.input_shape;
        if let Some(bad) = images.iter().find(|im| im.shape() != (h, w, c)) {
            return Err(Error::Shape(format!("image is {:?}, judge expects {:?}", bad.shape(), (h, w, c))));
        }
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(INFERENCE_CHUNK) {
            let y = self.net.infer(&stack(chunk));
            out.extend((0..chunk.len()).map(|i| y.item(i).to_vec()));
        }
        Ok(out)
    }

    pub fn classify(&self, image: &ImageTensor) -> Result<ConfidenceVector> {
        self.classify_batch(std::slice::from_ref(image)).map(|mut v| v.remove(0))
    }

    /// Order-preserving batch classification.
    pub fn classify_batch(&self, images: &[ImageTensor]) -> Result<Vec<ConfidenceVector>> {
        self.expect(JudgeKind::Classifier)?;
        Ok(self.raw_outputs(images)?.iter().map(|l| ConfidenceVector::from_logits(l)).collect())
    }

    pub fn predict_va(&self, image: &ImageTensor) -> Result<VAPoint> {
        self.predict_va_batch(std::slice::from_ref(image)).map(|mut v| v.remove(0))
    }

    pub fn predict_va_batch(&self, images: &[ImageTensor]) -> Result<Vec<VAPoint>> {
        self.expect(JudgeKind::Regressor)?;
        Ok(self.raw_outputs(images)?.iter().map(|o| VAPoint::new(o[0] as f64, o[1] as f64)).collect())
    }

    /// Accuracy and confusion matrix on `set`.
    pub fn evaluate_classifier(&self, set: &LabeledImageSet) -> Result<ClassifierScores> {
        self.expect(JudgeKind::Classifier)?;
        if Some(set.label_map()) != self.manifest.label_map.as_ref() {
            return Err(Error::Consistency("evaluation set uses a different label map".into()));
        }
        if set.is_empty() {
            return Err(Error::EmptyInput("evaluation set".into()));
        }
        let k = set.n_classes();
        let mut confusion = vec![vec![0usize; k]; k];
        for (cv, &truth) in self.classify_batch(set.images())?.iter().zip(set.labels()) {
            confusion[truth][cv.argmax()] += 1;
        }
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        Ok(ClassifierScores { accuracy: correct as f64 / set.len() as f64, confusion })
    }

    /// RMSE, CORR, SAGR and CCC per axis on `set`.
    pub fn evaluate_regressor(&self, set: &VAAnnotatedSet) -> Result<Vec<AxisMetrics>> {
        let preds = self.predict_va_batch(set.set.images())?;
        let pv: Vec<f64> = preds.iter().map(|p| p.valence).collect();
        let pa: Vec<f64> = preds.iter().map(|p| p.arousal).collect();
        let tv: Vec<f64> = set.va().iter().map(|p| p.0).collect();
        let ta: Vec<f64> = set.va().iter().map(|p| p.1).collect();
        Ok(vec![AxisMetrics::compute(AXES[0], &pv, &tv)?, AxisMetrics::compute(AXES[1], &pa, &ta)?])
    }
}

/// Output head of a judge network.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    /// One softmax logit per named class.
    Classes(Vec<String>),
    /// Tanh-bounded outputs, one per named axis.
    Bounded(Vec<String>),
}

fn head_of(m: &JudgeManifest) -> Result<Head> {
    match (m.kind, &m.label_map, &m.axes) {
        (JudgeKind::Classifier, Some(lm), _) => Ok(Head::Classes(lm.names().to_vec())),
        (JudgeKind::Regressor, _, Some(axes)) => Ok(Head::Bounded(axes.clone())),
        _ => Err(Error::Consistency("judge manifest lacks its label map or axis names".into())),
    }
}

/// Network input for the images at `idx`.
pub(crate) fn batch_of(images: &[ImageTensor], idx: &[usize]) -> Tensor<f32> {
    stack(idx.iter().map(|&i| &images[i]))
}
