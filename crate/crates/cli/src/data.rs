use std::path::{Path, PathBuf};

use interlerp::datasets::{load_cifar10, load_fashion_mnist, load_image_folder, load_synth_faces, LabeledImageSet, Split, VAAnnotatedSet};

use crate::config::{resolve_data_path, DatasetKind, DatasetSection};
use crate::error::CliError;

const DEFAULT_FOLDER_SIZE: u32 = 64;

/// Guesses the format of a dataset directory from the files it holds.
pub fn detect(dir: &Path) -> Option<DatasetKind> {
    let has = |name: &str| dir.join(name).exists();
    if has("va.csv") {
        Some(DatasetKind::SynthFaces)
    } else if has("train-images-idx3-ubyte") || has("train-images-idx3-ubyte.gz") {
        Some(DatasetKind::FashionMnist)
    } else if has("cifar-10-batches-bin") || has("data_batch_1.bin") {
        Some(DatasetKind::Cifar10)
    } else if dir.is_dir() {
        Some(DatasetKind::ImageFolder)
    } else {
        None
    }
}

/// `--data` wins, then the config's dataset path; either must exist.
pub fn resolve_dir(flag: Option<&Path>, section: Option<&DatasetSection>) -> Result<PathBuf, CliError> {
    let dir = match (flag, section.and_then(|s| s.path.as_deref())) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(p)) => resolve_data_path(p),
        (None, None) => return Err(CliError::Usage("no dataset given: pass --data <DIR> or set dataset.path in the config".into())),
    };
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("data directory {} does not exist", dir.display())));
    }
    Ok(dir)
}

fn tail_split(set: &LabeledImageSet, test: usize) -> Result<(LabeledImageSet, LabeledImageSet), CliError> {
    if test == 0 || test >= set.len() {
        return Err(interlerp::Error::Data(format!("cannot hold out {test} of {} samples", set.len())).into());
    }
    let cut = set.len() - test;
    let mut train = set.subset(&(0..cut).collect::<Vec<_>>());
    let mut held = set.subset(&(cut..set.len()).collect::<Vec<_>>());
    train.split = Split::Train;
    held.split = Split::Test;
    Ok((train, held))
}

fn held_out(section: Option<&DatasetSection>, n: usize) -> usize {
    section.and_then(|s| s.test_samples).unwrap_or((n / 10).max(1))
}

/// Train and held-out labelled sets.
pub fn load_splits(
    kind: DatasetKind,
    dir: &Path,
    section: Option<&DatasetSection>,
) -> Result<(LabeledImageSet, LabeledImageSet), CliError> {
    match kind {
        DatasetKind::FashionMnist => Ok(load_fashion_mnist(dir)?),
        DatasetKind::Cifar10 => Ok(load_cifar10(dir)?),
        DatasetKind::ImageFolder => {
            let size = section.and_then(|s| s.image_size).unwrap_or(DEFAULT_FOLDER_SIZE);
            let all = load_image_folder(dir, size)?;
            let test = held_out(section, all.len());
            tail_split(&all, test)
        }
        DatasetKind::SynthFaces => {
            let all = load_synth_faces(dir)?;
            let test = held_out(section, all.len());
            tail_split(&all.set, test)
        }
    }
}

/// The set a generator is trained on: the official train split where there
/// is one, otherwise everything.
pub fn load_for_gan(kind: DatasetKind, dir: &Path, section: Option<&DatasetSection>) -> Result<LabeledImageSet, CliError> {
    match kind {
        DatasetKind::FashionMnist => Ok(load_fashion_mnist(dir)?.0),
        DatasetKind::Cifar10 => Ok(load_cifar10(dir)?.0),
        DatasetKind::ImageFolder => Ok(load_image_folder(dir, section.and_then(|s| s.image_size).unwrap_or(DEFAULT_FOLDER_SIZE))?),
        DatasetKind::SynthFaces => Ok(load_synth_faces(dir)?.set),
    }
}

/// Train and held-out sets with valence/arousal targets.
pub fn load_va_splits(
    kind: DatasetKind,
    dir: &Path,
    section: Option<&DatasetSection>,
) -> Result<(VAAnnotatedSet, VAAnnotatedSet), CliError> {
    if kind != DatasetKind::SynthFaces {
        return Err(CliError::Usage(format!("valence/arousal judges need a dataset with va.csv annotations; {} has none", dir.display())));
    }
    let all = load_synth_faces(dir)?;
    let test = held_out(section, all.len());
    Ok(all.split_tail(test)?)
}
