use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit pixel -> [-1, 1].
pub fn normalize(byte: u8) -> f32 {
    byte as f32 / 127.5 - 1.0
}

/// [-1, 1] -> nearest 8-bit pixel (values outside the range saturate).
pub fn denormalize(x: f32) -> u8 {
    ((x + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// An `H x W x C` image in normalised pixel space.
///
/// Pixels are stored channel-planar (`C` planes of `H * W` row-major values),
/// which is the layout the networks consume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!("{} values for a {height}x{width}x{channels} image", data.len())));
        }
        if let Some(bad) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Shape(format!("pixel value {bad} outside [-1, 1]")));
        }
        Ok(Self { height, width, channels, data })
    }

    /// From channel-planar bytes.
    pub fn from_planar_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, channels, bytes.iter().map(|&b| normalize(b)).collect())
    }

    /// From pixel-interleaved bytes (`RGBRGB...`).
    pub fn from_interleaved_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * channels {
            return Err(Error::Shape(format!("{} bytes for a {height}x{width}x{channels} image", bytes.len())));
        }
        let plane = height * width;
        let mut data = vec![0.0; bytes.len()];
        for (i, px) in bytes.chunks_exact(channels).enumerate() {
            for (c, &b) in px.iter().enumerate() {
                data[c * plane + i] = normalize(b);
            }
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn planar_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| denormalize(v)).collect()
    }

    pub fn pixel(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[channel * self.height * self.width + row * self.width + col]
    }

    pub fn to_dynamic(&self) -> Result<DynamicImage> {
        let plane = self.height * self.width;
        let (w, h) = (self.width as u32, self.height as u32);
        match self.channels {
            1 => Ok(DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, self.planar_bytes()).expect("buffer sized from shape"))),
            3 => {
                let bytes = self.planar_bytes();
                let mut inter = Vec::with_capacity(bytes.len());
                for i in 0..plane {
                    for c in 0..3 {
                        inter.push(bytes[c * plane + i]);
                    }
                }
                Ok(DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, inter).expect("buffer sized from shape")))
            }
            c => Err(Error::Shape(format!("cannot encode a {c}-channel image"))),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_dynamic()?.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_round_trip_is_exact() {
        for b in 0..=255u8 {
            let x = normalize(b);
            assert!((-1.0..=1.0).contains(&x));
            assert_eq!(denormalize(x), b);
        }
        assert_eq!(normalize(0), -1.0);
        assert_eq!(normalize(255), 1.0);
    }

    #[test]
    fn interleaved_becomes_planar() {
        let img = ImageTensor::from_interleaved_bytes(1, 2, 3, &[0, 255, 0, 255, 0, 255]).unwrap();
        assert_eq!(img.data(), &[-1.0, 1.0, 1.0, -1.0, -1.0, 1.0]);
        assert_eq!(img.pixel(0, 1, 2), 1.0);
    }

    #[test]
    fn rejects_out_of_range_and_bad_shape() {
        assert!(ImageTensor::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageTensor::new(2, 1, 1, vec![0.0]).is_err());
    }
}
