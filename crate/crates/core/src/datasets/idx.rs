use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{LabeledImageSet, Split};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::LabelMap;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

pub const FASHION_MNIST_CLASSES: [&str; 10] =
    ["T-shirt/top", "Trouser", "Pullover", "Dress", "Coat", "Sandal", "Shirt", "Sneaker", "Bag", "Ankle boot"];

/// Reads a whole file, transparently gunzipping `*.gz`.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let f = File::open(path).map_err(Error::io(format!("opening {}", path.display())))?;
    let mut buf = Vec::new();
    let mut reader: Box<dyn Read> =
        if path.extension().is_some_and(|e| e == "gz") { Box::new(GzDecoder::new(BufReader::new(f))) } else { Box::new(BufReader::new(f)) };
    reader.read_to_end(&mut buf).map_err(|e| Error::format(path, format!("read failed: {e}")))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

/// Loads an IDX image/label file pair (optionally gzipped).
///
/// Classes are named by their decimal label value; use
/// [`load_fashion_mnist`] for the named Fashion-MNIST classes.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let (images, labels) = read_idx_pair(images_path, labels_path)?;
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1).max(2);
    let label_map = LabelMap::new((0..n_classes).map(|i| i.to_string()).collect())?;
    LabeledImageSet::new(images, labels, label_map, split_from_name(images_path))
}

fn split_from_name(path: &Path) -> Split {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.starts_with("t10k") || name.contains("test") {
        Split::Test
    } else {
        Split::Train
    }
}

fn read_idx_pair(images_path: &Path, labels_path: &Path) -> Result<(Vec<ImageTensor>, Vec<usize>)> {
    let ib = read_maybe_gz(images_path)?;
    let lb = read_maybe_gz(labels_path)?;

    let magic = be_u32(&ib, 0, images_path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(images_path, format!("bad image magic {magic:#010x}")));
    }
    let magic = be_u32(&lb, 0, labels_path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(labels_path, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(&ib, 4, images_path)? as usize;
    let rows = be_u32(&ib, 8, images_path)? as usize;
    let cols = be_u32(&ib, 12, images_path)? as usize;
    let label_count = be_u32(&lb, 4, labels_path)? as usize;
    if count != label_count {
        return Err(Error::Consistency(format!("{count} images but {label_count} labels")));
    }
    let px = rows * cols;
    if ib.len() != 16 + count * px {
        return Err(Error::format(images_path, format!("expected {} payload bytes, found {}", count * px, ib.len() - 16)));
    }
    if lb.len() != 8 + count {
        return Err(Error::format(labels_path, format!("expected {count} labels, found {}", lb.len() - 8)));
    }
    let images = ib[16..]
        .chunks_exact(px.max(1))
        .take(count)
        .map(|chunk| ImageTensor::from_planar_bytes(rows, cols, 1, chunk))
        .collect::<Result<Vec<_>>>()?;
    let labels = lb[8..].iter().map(|&b| b as usize).collect();
    Ok((images, labels))
}

fn find_file(dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
    for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::format(dir.join(stem), "file not found (plain or .gz)"))
}

/// Loads the official Fashion-MNIST train and test splits from `dir`.
pub fn load_fashion_mnist(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let label_map = LabelMap::new(FASHION_MNIST_CLASSES.iter().map(|s| s.to_string()).collect())?;
    let mut out = Vec::new();
    for (prefix, split) in [("train", Split::Train), ("t10k", Split::Test)] {
        let (images, labels) = read_idx_pair(
            &find_file(dir, &format!("{prefix}-images-idx3-ubyte"))?,
            &find_file(dir, &format!("{prefix}-labels-idx1-ubyte"))?,
        )?;
        out.push(LabeledImageSet::new(images, labels, label_map.clone(), split)?);
    }
    let test = out.pop().expect("two splits");
    let train = out.pop().expect("two splits");
    Ok((train, test))
}
