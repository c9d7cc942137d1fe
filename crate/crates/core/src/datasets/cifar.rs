use std::path::{Path, PathBuf};

use super::{LabeledImageSet, Split};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::LabelMap;

const SIDE: usize = 32;
const PIXELS: usize = SIDE * SIDE * 3;
const RECORD: usize = PIXELS + 1;

pub const CIFAR10_CLASSES: [&str; 10] = ["airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"];

/// Parses concatenated CIFAR-10 binary records (label byte then 1024 R,
/// 1024 G, 1024 B). `origin` is only used in error messages.
pub fn parse_cifar_records(bytes: &[u8], origin: &Path) -> Result<(Vec<ImageTensor>, Vec<usize>)> {
    if !bytes.len().is_multiple_of(RECORD) {
        return Err(Error::format(origin, format!("{} bytes is not a multiple of {RECORD}", bytes.len())));
    }
    let n = bytes.len() / RECORD;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let label = rec[0] as usize;
        if label > 9 {
            return Err(Error::format(origin, format!("record {i} has label byte {label}")));
        }
        labels.push(label);
        images.push(ImageTensor::from_planar_bytes(SIDE, SIDE, 3, &rec[1..])?);
    }
    Ok((images, labels))
}

fn read_batch(path: &Path) -> Result<(Vec<ImageTensor>, Vec<usize>)> {
    if !path.is_file() {
        return Err(Error::format(path, "missing CIFAR-10 batch file"));
    }
    let bytes = std::fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_cifar_records(&bytes, path)
}

/// Accepts either the batch directory itself or its parent holding
/// `cifar-10-batches-bin/`.
fn batch_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("cifar-10-batches-bin");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn class_names(dir: &Path) -> Vec<String> {
    let from_meta = std::fs::read_to_string(dir.join("batches.meta.txt"))
        .ok()
        .map(|text| text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect::<Vec<_>>());
    match from_meta {
        Some(names) if names.len() == 10 => names,
        _ => CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect(),
    }
}

/// Loads `data_batch_1..5.bin` and `test_batch.bin`.
pub fn load_cifar10(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = batch_dir(dir);
    let label_map = LabelMap::new(class_names(&dir))?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for k in 1..=5 {
        let (im, lb) = read_batch(&dir.join(format!("data_batch_{k}.bin")))?;
        images.extend(im);
        labels.extend(lb);
    }
    let train = LabeledImageSet::new(images, labels, label_map.clone(), Split::Train)?;
    let (im, lb) = read_batch(&dir.join("test_batch.bin"))?;
    let test = LabeledImageSet::new(im, lb, label_map, Split::Test)?;
    Ok((train, test))
}
