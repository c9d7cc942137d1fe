use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_z_dim() -> usize {
    100
}
fn default_base_channels() -> usize {
    64
}
fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.999
}
fn default_batch_size() -> usize {
    32
}
fn default_log_every() -> usize {
    100
}

/// Architecture and optimisation settings for one conditional GAN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    #[serde(default = "default_z_dim")]
    pub z_dim: usize,
    pub n_classes: usize,
    /// `[H, W, C]`
    pub image_shape: [usize; 3],
    /// Channel width of the last hidden generator layer and the first
    /// discriminator layer; widths double towards the low-resolution end.
    #[serde(default = "default_base_channels")]
    pub base_channels: usize,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Batch budget. With `epochs` set, training stops at whichever comes first.
    pub total_batches: usize,
    /// Full passes over the data; each pass is `floor(N / batch_size)` batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Progress callback period, in batches.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

impl GanConfig {
    /// Defaults for everything not tied to the data or the schedule.
    pub fn new(n_classes: usize, image_shape: [usize; 3], learning_rate: f64, total_batches: usize) -> Self {
        Self {
            z_dim: default_z_dim(),
            n_classes,
            image_shape,
            base_channels: default_base_channels(),
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            batch_size: default_batch_size(),
            total_batches,
            epochs: None,
            seed: 0,
            log_every: default_log_every(),
        }
    }

    pub fn height(&self) -> usize {
        self.image_shape[0]
    }

    pub fn width(&self) -> usize {
        self.image_shape[1]
    }

    pub fn channels(&self) -> usize {
        self.image_shape[2]
    }

    /// Side of the generator's first feature map.
    pub fn seed_size(&self) -> usize {
        if self.height() == 28 {
            7
        } else {
            4
        }
    }

    /// Number of 2x upsampling stages between the seed map and the output.
    pub fn upsamplings(&self) -> usize {
        (self.height() / self.seed_size()).trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Data(format!("invalid GAN config: {m}")));
        let [h, w, c] = self.image_shape;
        if self.z_dim == 0 {
            return bad("z_dim must be at least 1".into());
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if h != w {
            return bad(format!("images must be square, got {h}x{w}"));
        }
        let power_of_two_multiple = h % 4 == 0 && (h / 4).is_power_of_two() && h >= 8;
        if h != 28 && !power_of_two_multiple {
            return bad(format!("side {h} is neither 28 nor 4 * 2^k with k >= 1"));
        }
        if c != 1 && c != 3 {
            return bad(format!("channels must be 1 or 3, got {c}"));
        }
        if self.base_channels == 0 || self.batch_size == 0 || self.total_batches == 0 || self.log_every == 0 {
            return bad("base_channels, batch_size, total_batches and log_every must be positive".into());
        }
        if self.epochs == Some(0) {
            return bad("epochs must be positive when given".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }

    /// Batches actually run on a dataset of `n` samples.
    pub fn planned_batches(&self, n: usize) -> usize {
        let per_epoch = (n / self.batch_size.min(n).max(1)).max(1);
        match self.epochs {
            Some(e) => (e * per_epoch).min(self.total_batches),
            None => self.total_batches,
        }
    }
}
