use std::path::PathBuf;

use crate::label_space::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("class index {index} out of range for {n} classes")]
    Index { index: usize, n: usize },

    #[error("cannot move {requested} from class {source_class}: only {available} available")]
    InsufficientMass { source_class: usize, requested: f64, available: f64 },

    #[error("source and target class are both {0}")]
    DegenerateTransfer(usize),

    #[error("step size must lie in (0, 1], got {0}")]
    InvalidStepSize(f64),

    #[error("invalid conditioning vector: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("checksum mismatch for {}: expected {expected}, got {actual}{}", path.display(), quarantine_note(.quarantined))]
    Integrity { path: PathBuf, expected: String, actual: String, quarantined: Option<PathBuf> },

    #[error("all sources failed for {file}: {}", .reasons.join("; "))]
    Network { file: String, reasons: Vec<String> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged after {batches} batches (last finite checkpoint at {})", checkpoint.display())]
    Divergence { batches: u64, checkpoint: PathBuf },

    #[error("quality gate failed: {metric} = {value:.4} below floor {floor} (checkpoint saved at {})", checkpoint.display())]
    QualityGate { metric: String, value: f64, floor: f64, checkpoint: PathBuf },

    #[error("expected a {expected} checkpoint, got {actual}")]
    Kind { expected: &'static str, actual: &'static str },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
        Error::Format { path: path.into(), message: message.into() }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn quarantine_note(q: &Option<PathBuf>) -> String {
    q.as_ref().map(|p| format!(" (moved to {})", p.display())).unwrap_or_default()
}
