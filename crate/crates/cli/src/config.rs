use std::path::{Path, PathBuf};

use interlerp::cgan::GanConfig;
use interlerp::datasets::SyntheticFaceSpec;
use interlerp::judges::JudgeConfig;
use interlerp::sweep::{AxisMap, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const PRESETS: [(&str, &str); 3] = [
    ("fashion_mnist", include_str!("../presets/fashion_mnist.json")),
    ("cifar10", include_str!("../presets/cifar10.json")),
    ("synth_faces", include_str!("../presets/synth_faces.json")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    FashionMnist,
    #[serde(rename = "cifar-10")]
    #[value(name = "cifar-10")]
    Cifar10,
    ImageFolder,
    SynthFaces,
}

impl DatasetKind {
    pub fn preset(self) -> Option<&'static str> {
        match self {
            DatasetKind::FashionMnist => Some("fashion_mnist"),
            DatasetKind::Cifar10 => Some("cifar10"),
            DatasetKind::SynthFaces => Some("synth_faces"),
            DatasetKind::ImageFolder => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Relative paths resolve against `INTERLERP_DATA_DIR` when it is set.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Square side that image-folder inputs are resized to.
    #[serde(default)]
    pub image_size: Option<u32>,
    /// Held-out size for sets without an official test split.
    #[serde(default)]
    pub test_samples: Option<usize>,
    /// Generation settings for `synth-faces`.
    #[serde(default)]
    pub synth: Option<SyntheticFaceSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    #[serde(default)]
    pub classifier: Option<JudgeConfig>,
    #[serde(default)]
    pub va: Option<JudgeConfig>,
}

fn default_neutral() -> String {
    interlerp::datasets::synth::NEUTRAL.to_owned()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub spec: SweepSpec,
    #[serde(default)]
    pub axes: AxisMap,
    #[serde(default = "default_neutral")]
    pub neutral: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { spec: SweepSpec::default(), axes: AxisMap::default(), neutral: default_neutral() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Draw every class in confidence plots, not just source and target.
    #[serde(default)]
    pub all_classes: bool,
}

/// One JSON document configuring a whole experiment. Every section is
/// optional; commands fall back to module defaults for missing ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub gan: Option<GanConfig>,
    #[serde(default)]
    pub judge: Option<JudgeSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub report: Option<ReportSection>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let key = name.replace('-', "_");
        let (_, text) = PRESETS.iter().find(|(k, _)| *k == key).ok_or_else(|| {
            let known: Vec<&str> = Self::preset_names().collect();
            CliError::Usage(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
        })?;
        Self::parse(text, &format!("preset {key}"))
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(k, _)| *k)
    }

    /// Checks every section; the first violation is returned.
    pub fn validate(&self) -> Result<(), CliError> {
        fn ctx(section: &'static str) -> impl Fn(interlerp::Error) -> CliError {
            move |e| CliError::Usage(format!("{section}: {e}"))
        }
        if let Some(d) = &self.dataset {
            if let Some(s) = &d.synth {
                s.validate().map_err(ctx("dataset.synth"))?;
            }
            if d.kind != DatasetKind::SynthFaces {
                if let Some(p) = &d.path {
                    let resolved = resolve_data_path(p);
                    if !resolved.exists() {
                        return Err(CliError::Usage(format!("dataset.path {} does not exist", resolved.display())));
                    }
                }
            }
        }
        if let Some(g) = &self.gan {
            g.validate().map_err(ctx("gan"))?;
        }
        if let Some(j) = &self.judge {
            for (name, c) in [("judge.classifier", &j.classifier), ("judge.va", &j.va)] {
                if let Some(c) = c {
                    c.validate().map_err(ctx(name))?;
                }
            }
        }
        if let Some(s) = &self.sweep {
            s.spec.validate().map_err(ctx("sweep.spec"))?;
            if s.axes.valence == s.neutral || s.axes.arousal == s.neutral {
                return Err(CliError::Usage("sweep.axes: an axis maximiser cannot be the neutral class".into()));
            }
        }
        Ok(())
    }
}

/// Relative dataset paths are taken under `INTERLERP_DATA_DIR` when set.
pub fn resolve_data_path(p: &Path) -> PathBuf {
    match std::env::var_os("INTERLERP_DATA_DIR") {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}
