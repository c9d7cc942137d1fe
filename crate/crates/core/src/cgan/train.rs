use std::path::Path;

use interlerp_nn::loss::bce_with_logits;
use interlerp_nn::{Adam, ParamMut, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::model::{build_discriminator, build_generator, discriminator_loss};
use super::{GanConfig, GanManifest, GeneratorCheckpoint, TrainingStatus, LOSSES_FILE, NOISE_DISTRIBUTION};
use crate::datasets::LabeledImageSet;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Consecutive non-finite batches tolerated before giving up.
const DIVERGENCE_PATIENCE: u64 = 500;

/// Periodic training report.
#[derive(Clone, Debug, PartialEq)]
pub struct Progress {
    /// Batches completed so far.
    pub batch: u64,
    pub total: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Means over the batches since the previous report.
    pub mean_d_loss: f64,
    pub mean_g_loss: f64,
}

pub trait ProgressSink {
    fn report(&mut self, progress: &Progress);
}

impl<F: FnMut(&Progress)> ProgressSink for F {
    fn report(&mut self, progress: &Progress) {
        self(progress)
    }
}

fn one_hot_rows(labels: &[usize], n: usize) -> Tensor<f32> {
    let mut data = vec![0.0; labels.len() * n];
    for (i, &l) in labels.iter().enumerate() {
        data[i * n + l] = 1.0;
    }
    Tensor::from_vec(&[labels.len(), n], data)
}

fn grads_finite(params: Vec<ParamMut<'_, f32>>) -> bool {
    params.iter().all(|p| p.grad.iter().all(|g| g.is_finite()))
}

/// Trains a conditional GAN on `dataset`, writing `losses.csv`,
/// `weights.bin` and `manifest.json` into `out_dir`.
///
/// Each batch takes one discriminator step on real samples (with their true
/// labels) and fakes (with uniformly drawn labels), then one generator step
/// against the updated discriminator on the same fakes. A batch whose losses
/// or gradients are not finite leaves the weights untouched. After
/// 500 such batches in a row the current, still finite, weights are saved
/// with status `diverged` and [`Error::Divergence`] is returned.
pub fn train(dataset: &LabeledImageSet, config: &GanConfig, out_dir: &Path, sink: &mut dyn ProgressSink) -> Result<GeneratorCheckpoint> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if dataset.n_classes() != config.n_classes {
        return Err(Error::Consistency(format!("dataset has {} classes, config expects {}", dataset.n_classes(), config.n_classes)));
    }
    let [h, w, c] = config.image_shape;
    if dataset.shape() != Some((h, w, c)) {
        return Err(Error::Shape(format!("dataset images are {:?}, config expects {:?}", dataset.shape(), (h, w, c))));
    }
    std::fs::create_dir_all(out_dir).map_err(Error::io(format!("creating {}", out_dir.display())))?;

    let n = dataset.len();
    let k = config.n_classes;
    let bs = config.batch_size.min(n);
    let per_epoch = n / bs;
    let planned = config.planned_batches(n) as u64;

    let mut g = build_generator::<f32>(config);
    let mut d = build_discriminator::<f32>(config);
    let mut opt_g = Adam::new(config.learning_rate, config.beta1, config.beta2);
    let mut opt_d = Adam::new(config.learning_rate, config.beta1, config.beta2);
    let mut fake_rng = substream(config.seed, &[domain::FAKE_LABELS]);

    let mut losses = csv::Writer::from_path(out_dir.join(LOSSES_FILE))?;
    losses.write_record(["batch", "d_loss", "g_loss"])?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut last_finite: Option<(f64, f64)> = None;
    let mut bad_streak = 0u64;
    let mut window = (0.0f64, 0.0f64, 0u64);
    let mut completed = 0u64;

    for b in 0..planned {
        let (epoch, pos) = (b / per_epoch as u64, (b % per_epoch as u64) as usize);
        if pos == 0 {
            order = (0..n).collect();
            order.shuffle(&mut substream(config.seed, &[domain::BATCH, epoch]));
        }
        let idx = &order[pos * bs..(pos + 1) * bs];
        let real = dataset.batch_tensor(idx);
        let real_labels: Vec<usize> = idx.iter().map(|&i| dataset.labels()[i]).collect();
        let real_v = one_hot_rows(&real_labels, k);

        let fake_labels: Vec<usize> = (0..bs).map(|_| fake_rng.random_range(0..k)).collect();
        let z: Vec<f32> = (0..bs * config.z_dim).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut fake_rng) as f32).collect();
        let z = Tensor::from_vec(&[bs, config.z_dim], z);
        let fake_v = one_hot_rows(&fake_labels, k);

        g.zero_grad();
        let fake = g.forward(&z, &fake_v)?;

        let d_loss = discriminator_loss(&mut d, &real, &real_v, &fake, &fake_v)?;
        let d_ok = d_loss.is_finite() && grads_finite(d.params());
        if d_ok {
            opt_d.step(d.params());
        }

        let logits = d.forward(&fake, &fake_v)?;
        let (g_loss, grad) = bce_with_logits(&logits, 1.0f32);
        let grad_fake = d.backward(&grad);
        g.backward(&grad_fake);
        let g_ok = g_loss.is_finite() && grads_finite(g.params());
        if g_ok {
            opt_g.step(g.params());
        }

        completed = b + 1;
        losses.write_record([completed.to_string(), d_loss.to_string(), g_loss.to_string()])?;

        if d_ok && g_ok {
            bad_streak = 0;
            last_finite = Some((d_loss as f64, g_loss as f64));
            window = (window.0 + d_loss as f64, window.1 + g_loss as f64, window.2 + 1);
        } else {
            bad_streak += 1;
            if bad_streak >= DIVERGENCE_PATIENCE {
                losses.flush().map_err(Error::io("writing losses.csv"))?;
                let mut ck = finish(dataset, config, g, d, completed, last_finite, TrainingStatus::Diverged);
                ck.save(out_dir)?;
                return Err(Error::Divergence { batches: completed, checkpoint: out_dir.to_path_buf() });
            }
        }

        if completed.is_multiple_of(config.log_every as u64) || completed == planned {
            let m = window.2.max(1) as f64;
            sink.report(&Progress {
                batch: completed,
                total: planned,
                d_loss: d_loss as f64,
                g_loss: g_loss as f64,
                mean_d_loss: window.0 / m,
                mean_g_loss: window.1 / m,
            });
            window = (0.0, 0.0, 0);
        }
    }
    losses.flush().map_err(Error::io("writing losses.csv"))?;
    let mut ck = finish(dataset, config, g, d, completed, last_finite, TrainingStatus::Complete);
    ck.save(out_dir)?;
    Ok(ck)
}

fn finish(
    dataset: &LabeledImageSet,
    config: &GanConfig,
    g: super::Generator<f32>,
    d: super::Discriminator<f32>,
    batches: u64,
    last_finite: Option<(f64, f64)>,
    status: TrainingStatus,
) -> GeneratorCheckpoint {
    let manifest = GanManifest {
        config: config.clone(),
        label_map: dataset.label_map().clone(),
        batches_completed: batches,
        loss_final_g: last_finite.map(|l| l.1),
        loss_final_d: last_finite.map(|l| l.0),
        noise_distribution: NOISE_DISTRIBUTION.into(),
        code_version: crate::CODE_VERSION.into(),
        status,
        dataset_fingerprint: Some(dataset.fingerprint()),
        weights_sha256: String::new(),
    };
    GeneratorCheckpoint::from_parts(manifest, g, d)
}
