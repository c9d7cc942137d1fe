//! Labelled image sets: loaders, the synthetic face generator and downloads.

mod cifar;
mod download;
mod folder;
mod idx;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use cifar::{load_cifar10, parse_cifar_records, CIFAR10_CLASSES};
pub use download::{download_dataset, known_sources, DownloadManifest, DownloadOutcome, ManifestEntry, RemoteFile};
pub use folder::{load_image_folder, load_image_folder_with_paths};
pub use idx::{load_fashion_mnist, load_idx, FASHION_MNIST_CLASSES};
pub use synth::{load_synth_faces, render_face, save_synth_faces, synth_faces, FaceGeometry, FaceJitter, SyntheticFaceSpec};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::LabelMap;
use interlerp_nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Images with categorical labels, all of one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<ImageTensor>,
    labels: Vec<usize>,
    label_map: LabelMap,
    pub split: Split,
}

impl LabeledImageSet {
    pub fn new(images: Vec<ImageTensor>, labels: Vec<usize>, label_map: LabelMap, split: Split) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Consistency(format!("{} images but {} labels", images.len(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_map.len()) {
            return Err(Error::Index { index: bad, n: label_map.len() });
        }
        if let Some(first) = images.first() {
            if let Some(other) = images.iter().find(|im| im.shape() != first.shape()) {
                return Err(Error::Shape(format!("mixed image shapes {:?} and {:?}", first.shape(), other.shape())));
            }
        }
        Ok(Self { images, labels, label_map, split })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[ImageTensor] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn n_classes(&self) -> usize {
        self.label_map.len()
    }

    /// `(H, W, C)` of the images, `None` when empty.
    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(ImageTensor::shape)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_map: self.label_map.clone(),
            split: self.split,
        }
    }

    /// Stacks the selected images into an `(N, C, H, W)` tensor.
    pub fn batch_tensor(&self, indices: &[usize]) -> Tensor<f32> {
        stack(indices.iter().map(|&i| &self.images[i]))
    }

    /// Replaces the label map and relabels every sample through `perm`
    /// (`new_label = perm[old_label]`).
    pub fn permute_labels(&self, perm: &[usize], label_map: LabelMap) -> Result<Self> {
        if perm.len() != self.n_classes() || label_map.len() != self.n_classes() {
            return Err(Error::Consistency("permutation size differs from class count".into()));
        }
        let labels = self.labels.iter().map(|&l| perm[l]).collect();
        Self::new(self.images.clone(), labels, label_map, self.split)
    }

    /// SHA-256 over shape, labels and pixel bytes.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(format!("{:?}{:?}", self.shape(), self.label_map.names()).as_bytes());
        for (im, &l) in self.images.iter().zip(&self.labels) {
            h.update((l as u32).to_le_bytes());
            h.update(im.planar_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Stacks images into an `(N, C, H, W)` tensor.
pub fn stack<'a>(images: impl IntoIterator<Item = &'a ImageTensor>) -> Tensor<f32> {
    let mut data = Vec::new();
    let mut n = 0;
    let mut shape = (0, 0, 0);
    for im in images {
        shape = im.shape();
        data.extend_from_slice(im.data());
        n += 1;
    }
    let (h, w, c) = shape;
    Tensor::from_vec(&[n, c, h, w], data)
}

/// A labelled set with continuous (valence, arousal) ground truth per image.
#[derive(Clone, Debug, PartialEq)]
pub struct VAAnnotatedSet {
    pub set: LabeledImageSet,
    va: Vec<(f64, f64)>,
}

impl VAAnnotatedSet {
    pub fn new(set: LabeledImageSet, va: Vec<(f64, f64)>) -> Result<Self> {
        if va.len() != set.len() {
            return Err(Error::Consistency(format!("{} VA pairs for {} images", va.len(), set.len())));
        }
        if let Some(p) = va.iter().find(|(v, a)| !((-1.0..=1.0).contains(v) && (-1.0..=1.0).contains(a))) {
            return Err(Error::Data(format!("VA pair {p:?} outside [-1, 1]^2")));
        }
        Ok(Self { set, va })
    }

    pub fn va(&self) -> &[(f64, f64)] {
        &self.va
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { set: self.set.subset(indices), va: indices.iter().map(|&i| self.va[i]).collect() }
    }

    /// Splits off the last `test` samples as a held-out set.
    pub fn split_tail(&self, test: usize) -> Result<(Self, Self)> {
        if test == 0 || test >= self.len() {
            return Err(Error::Data(format!("cannot hold out {test} of {} samples", self.len())));
        }
        let cut = self.len() - test;
        let train: Vec<usize> = (0..cut).collect();
        let held: Vec<usize> = (cut..self.len()).collect();
        let mut tr = self.subset(&train);
        let mut te = self.subset(&held);
        tr.set.split = Split::Train;
        te.set.split = Split::Test;
        Ok((tr, te))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: f32) -> ImageTensor {
        ImageTensor::new(1, 2, 1, vec![v, v]).unwrap()
    }

    #[test]
    fn set_invariants() {
        let lm = LabelMap::new(vec!["a".into(), "b".into()]).unwrap();
        assert!(LabeledImageSet::new(vec![img(0.0)], vec![0, 1], lm.clone(), Split::Train).is_err());
        assert!(LabeledImageSet::new(vec![img(0.0)], vec![2], lm.clone(), Split::Train).is_err());
        let odd = ImageTensor::new(2, 1, 1, vec![0.0, 0.0]).unwrap();
        assert!(LabeledImageSet::new(vec![img(0.0), odd], vec![0, 1], lm.clone(), Split::Train).is_err());
        let s = LabeledImageSet::new(vec![img(0.0), img(0.5), img(1.0)], vec![0, 1, 1], lm, Split::Train).unwrap();
        assert_eq!(s.class_counts(), vec![1, 2]);
        let t = s.batch_tensor(&[2, 0]);
        assert_eq!(t.shape(), &[2, 1, 1, 2]);
        assert_eq!(t.data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn va_bounds_checked() {
        let lm = LabelMap::new(vec!["a".into(), "b".into()]).unwrap();
        let s = LabeledImageSet::new(vec![img(0.0)], vec![0], lm, Split::Train).unwrap();
        assert!(VAAnnotatedSet::new(s.clone(), vec![(1.2, 0.0)]).is_err());
        assert!(VAAnnotatedSet::new(s, vec![(0.2, -1.0)]).is_ok());
    }
}
