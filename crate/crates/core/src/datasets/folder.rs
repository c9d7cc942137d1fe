use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::DynamicImage;

use super::{LabeledImageSet, Split};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::label_space::LabelMap;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = std::fs::read_dir(dir)
        .map_err(Error::io(format!("listing {}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(Error::io(format!("listing {}", dir.display())))?;
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn is_grayscale(img: &DynamicImage) -> bool {
    matches!(img.color().channel_count(), 1 | 2)
}

fn to_tensor(img: &DynamicImage, size: u32, channels: usize) -> Result<ImageTensor> {
    let s = size as usize;
    if channels == 1 {
        let g = image::imageops::resize(&img.to_luma8(), size, size, FilterType::Triangle);
        ImageTensor::from_planar_bytes(s, s, 1, g.as_raw())
    } else {
        let rgb = image::imageops::resize(&img.to_rgb8(), size, size, FilterType::Triangle);
        ImageTensor::from_interleaved_bytes(s, s, 3, rgb.as_raw())
    }
}

/// Loads `dir/<class>/*.{png,jpg,jpeg}`, resizing every image (bilinear) to
/// `target_size` square. Classes are the sorted subdirectory names.
pub fn load_image_folder(dir: &Path, target_size: u32) -> Result<LabeledImageSet> {
    load_image_folder_with_paths(dir, target_size).map(|(set, _)| set)
}

/// As [`load_image_folder`], also returning each image's path relative to `dir`.
///
/// Undecodable files are skipped with a warning. The set is single-channel
/// when every decoded image is grayscale and RGB otherwise.
pub fn load_image_folder_with_paths(dir: &Path, target_size: u32) -> Result<(LabeledImageSet, Vec<PathBuf>)> {
    if target_size == 0 {
        return Err(Error::Data("target size must be positive".into()));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::Data(format!("{} has no class subdirectories", dir.display())));
    }
    let names = class_dirs.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    let label_map = LabelMap::new(names)?;

    let mut decoded = Vec::new();
    for (label, class_dir) in class_dirs.iter().enumerate() {
        let before = decoded.len();
        for path in sorted_entries(class_dir)?.into_iter().filter(|p| p.is_file() && is_image(p)) {
            match image::open(&path) {
                Ok(img) => decoded.push((img, label, path)),
                Err(e) => log::warn!("skipping undecodable {}: {e}", path.display()),
            }
        }
        if decoded.len() == before {
            return Err(Error::Data(format!("class folder {} contains no decodable images", class_dir.display())));
        }
    }

    let channels = if decoded.iter().all(|(img, ..)| is_grayscale(img)) { 1 } else { 3 };
    let mut images = Vec::with_capacity(decoded.len());
    let mut labels = Vec::with_capacity(decoded.len());
    let mut paths = Vec::with_capacity(decoded.len());
    for (img, label, path) in decoded {
        images.push(to_tensor(&img, target_size, channels)?);
        labels.push(label);
        paths.push(path.strip_prefix(dir).map(Path::to_path_buf).unwrap_or(path));
    }
    Ok((LabeledImageSet::new(images, labels, label_map, Split::Train)?, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma, Rgb, RgbImage};

    #[test]
    fn two_classes_sorted_and_resized() {
        let d = tempfile::tempdir().unwrap();
        for class in ["zebra", "apple"] {
            std::fs::create_dir(d.path().join(class)).unwrap();
            for k in 0..2 {
                GrayImage::from_pixel(50, 40, Luma([k * 100])).save(d.path().join(class).join(format!("{k}.png"))).unwrap();
            }
        }
        std::fs::write(d.path().join("apple").join("notes.txt"), "ignored").unwrap();
        let (set, paths) = load_image_folder_with_paths(d.path(), 32).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.labels(), &[0, 0, 1, 1]);
        assert_eq!(set.label_map().names(), &["apple".to_string(), "zebra".to_string()]);
        assert_eq!(set.shape(), Some((32, 32, 1)));
        assert_eq!(paths[2], Path::new("zebra").join("0.png"));
    }

    #[test]
    fn colour_anywhere_makes_rgb() {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(d.path().join("a")).unwrap();
        std::fs::create_dir_all(d.path().join("b")).unwrap();
        GrayImage::from_pixel(8, 8, Luma([0])).save(d.path().join("a/x.png")).unwrap();
        RgbImage::from_pixel(8, 8, Rgb([255, 0, 0])).save(d.path().join("b/y.jpg")).unwrap();
        let set = load_image_folder(d.path(), 4).unwrap();
        assert_eq!(set.shape(), Some((4, 4, 3)));
    }

    #[test]
    fn empty_or_undecodable_class_is_data_error() {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(d.path().join("a")).unwrap();
        std::fs::create_dir_all(d.path().join("b")).unwrap();
        GrayImage::from_pixel(8, 8, Luma([0])).save(d.path().join("a/x.png")).unwrap();
        assert!(matches!(load_image_folder(d.path(), 4), Err(Error::Data(_))));
        std::fs::write(d.path().join("b/broken.png"), b"not a png").unwrap();
        assert!(matches!(load_image_folder(d.path(), 4), Err(Error::Data(_))));
    }
}
