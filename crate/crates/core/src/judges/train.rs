use std::path::Path;

use interlerp_nn::loss::{mse, softmax_cross_entropy};
use interlerp_nn::{Adam, Layer, Sequential, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{batch_of, build_judge_net, GateRecord, Head, JudgeCheckpoint, JudgeConfig, JudgeKind, JudgeManifest, JudgeMetrics, AXES};
use crate::datasets::{LabeledImageSet, VAAnnotatedSet};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Random horizontal flip and a shift of up to `H / 8` pixels per sample;
/// vacated pixels become 0.
fn augment(x: &mut Tensor<f32>, rng: &mut impl Rng) {
    let shape = x.shape().to_vec();
    let (c, h, w) = (shape[1], shape[2], shape[3]);
    let pad = (h / 8).max(1) as i64;
    let plane = h * w;
    for item in x.data_mut().chunks_mut(c * plane) {
        let flip = rng.random_bool(0.5);
        let dy = rng.random_range(-pad..=pad);
        let dx = rng.random_range(-pad..=pad);
        let src = item.to_vec();
        for ch in 0..c {
            for y in 0..h {
                for xo in 0..w {
                    let sy = (y as i64 + dy) as isize;
                    let sx0 = (xo as i64 + dx) as isize;
                    let sx = if flip { w as isize - 1 - sx0 } else { sx0 };
                    let inside = (0..h as isize).contains(&sy) && (0..w as isize).contains(&sx);
                    item[ch * plane + y * w + xo] = if inside { src[ch * plane + sy as usize * w + sx as usize] } else { 0.0 };
                }
            }
        }
    }
}

/// Mini-batch Adam over `n` samples with held-out evaluation after every
/// epoch. The best-scoring epoch's weights are restored at the end.
fn fit(
    net: &mut Sequential<f32>,
    config: &JudgeConfig,
    n: usize,
    mut batch: impl FnMut(&[usize]) -> Tensor<f32>,
    mut loss: impl FnMut(&Tensor<f32>, &[usize]) -> (f32, Tensor<f32>),
    mut evaluate: impl FnMut(&Sequential<f32>) -> Result<JudgeMetrics>,
) -> Result<(JudgeMetrics, usize)> {
    let bs = config.batch_size.min(n);
    let per_epoch = n / bs;
    let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
    let mut best: Option<(JudgeMetrics, Vec<Vec<f32>>)> = None;
    let mut epochs = 0;
    let mut last_degenerate = None;
    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(config.seed, &[domain::BATCH, epoch as u64]));
        let mut aug_rng = substream(config.seed, &[domain::AUGMENT, epoch as u64]);
        let mut total = 0.0f64;
        for idx in order.chunks_exact(bs).take(per_epoch) {
            let mut x = batch(idx);
            if config.augment {
                augment(&mut x, &mut aug_rng);
            }
            net.zero_grad();
            let y = net.forward(&x);
            let (l, g) = loss(&y, idx);
            net.backward(&g);
            if l.is_finite() && net.params().iter().all(|p| p.grad.iter().all(|v| v.is_finite())) {
                opt.step(net.params());
                total += l as f64;
            }
        }
        epochs = epoch + 1;
        let metrics = match evaluate(net) {
            Ok(m) => m,
            // a collapsed network predicts one constant; skip it as a candidate
            Err(e @ Error::DegenerateInput(_)) => {
                log::warn!("judge epoch {epochs}: held-out evaluation undefined ({e})");
                last_degenerate = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = metrics.gate_value();
        log::info!("judge epoch {epochs}: train loss {:.4}, held-out {} {score:.4}", total / per_epoch as f64, metrics.gate_metric());
        if best.as_ref().is_none_or(|(m, _)| score > m.gate_value()) {
            best = Some((metrics, net.state().iter().map(|s| s.to_vec()).collect()));
        }
        if config.stop_at.is_some_and(|t| score >= t) {
            break;
        }
    }
    let Some((metrics, state)) = best else {
        return Err(last_degenerate.expect("max_epochs is validated to be at least one"));
    };
    for (dst, src) in net.state_mut().into_iter().zip(state) {
        dst.copy_from_slice(&src);
    }
    Ok((metrics, epochs))
}

fn finish(mut ck: JudgeCheckpoint, out_dir: &Path) -> Result<JudgeCheckpoint> {
    ck.save(out_dir)?;
    if ck.manifest.gate.passed {
        Ok(ck)
    } else {
        let g = &ck.manifest.gate;
        Err(Error::QualityGate { metric: g.metric.clone(), value: g.value, floor: g.floor, checkpoint: out_dir.to_path_buf() })
    }
}

fn gate(metrics: &JudgeMetrics, config: &JudgeConfig) -> GateRecord {
    let value = metrics.gate_value();
    GateRecord {
        metric: metrics.gate_metric().into(),
        value,
        floor: config.floor,
        passed: value >= config.floor,
        note: config.gate_note.clone(),
    }
}

/// Trains a softmax classifier on `train`, scoring it on `test` after every
/// epoch.
///
/// The checkpoint is always written to `out_dir`. When the held-out accuracy
/// stays below `config.floor` it is marked as failing and
/// [`Error::QualityGate`] is returned.
pub fn train_classifier(train: &LabeledImageSet, test: &LabeledImageSet, config: &JudgeConfig, out_dir: &Path) -> Result<JudgeCheckpoint> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("classifier needs nonempty train and test sets".into()));
    }
    if train.label_map() != test.label_map() {
        return Err(Error::Consistency("train and test sets use different label maps".into()));
    }
    let (h, w, c) = train.shape().expect("nonempty");
    if test.shape() != train.shape() {
        return Err(Error::Shape(format!("test images are {:?}, train images {:?}", test.shape(), (h, w, c))));
    }
    let head = Head::Classes(train.label_map().names().to_vec());
    let mut net = build_judge_net(config, [h, w, c], &head);
    let mut manifest = JudgeManifest {
        kind: JudgeKind::Classifier,
        config: config.clone(),
        input_shape: [h, w, c],
        label_map: Some(train.label_map().clone()),
        axes: None,
        metrics: JudgeMetrics::Regressor { axes: Vec::new() },
        gate: GateRecord { metric: String::new(), value: 0.0, floor: config.floor, passed: false, note: None },
        epochs_completed: 0,
        train_fingerprint: train.fingerprint(),
        test_fingerprint: test.fingerprint(),
        code_version: crate::CODE_VERSION.into(),
        weights_sha256: String::new(),
    };
    let probe = manifest.clone();
    let labels = train.labels();
    let (metrics, epochs) = fit(
        &mut net,
        config,
        train.len(),
        |idx| batch_of(train.images(), idx),
        |y, idx| softmax_cross_entropy(y, &idx.iter().map(|&i| labels[i]).collect::<Vec<_>>()),
        |net| {
            let ck = JudgeCheckpoint::from_parts(probe.clone(), clone_net(net, &probe)?);
            ck.evaluate_classifier(test).map(JudgeMetrics::Classifier)
        },
    )?;
    manifest.gate = gate(&metrics, config);
    manifest.metrics = metrics;
    manifest.epochs_completed = epochs;
    finish(JudgeCheckpoint::from_parts(manifest, net), out_dir)
}

/// Trains the bounded valence/arousal regressor on `train`, scoring the
/// smaller of the two per-axis CCC values on `test` after every epoch.
///
/// Gate handling matches [`train_classifier`]; `metrics_report.csv` is
/// written next to the checkpoint.
pub fn train_va_regressor(train: &VAAnnotatedSet, test: &VAAnnotatedSet, config: &JudgeConfig, out_dir: &Path) -> Result<JudgeCheckpoint> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("regressor needs nonempty train and test sets".into()));
    }
    let (h, w, c) = train.set.shape().expect("nonempty");
    if test.set.shape() != train.set.shape() {
        return Err(Error::Shape(format!("test images are {:?}, train images {:?}", test.set.shape(), (h, w, c))));
    }
    let axes: Vec<String> = AXES.iter().map(|s| s.to_string()).collect();
    let mut net = build_judge_net(config, [h, w, c], &Head::Bounded(axes.clone()));
    let mut manifest = JudgeManifest {
        kind: JudgeKind::Regressor,
        config: config.clone(),
        input_shape: [h, w, c],
        label_map: None,
        axes: Some(axes),
        metrics: JudgeMetrics::Regressor { axes: Vec::new() },
        gate: GateRecord { metric: String::new(), value: 0.0, floor: config.floor, passed: false, note: None },
        epochs_completed: 0,
        train_fingerprint: train.set.fingerprint(),
        test_fingerprint: test.set.fingerprint(),
        code_version: crate::CODE_VERSION.into(),
        weights_sha256: String::new(),
    };
    let probe = manifest.clone();
    let va = train.va();
    let (metrics, epochs) = fit(
        &mut net,
        config,
        train.len(),
        |idx| batch_of(train.set.images(), idx),
        |y, idx| {
            let target: Vec<f32> = idx.iter().flat_map(|&i| [va[i].0 as f32, va[i].1 as f32]).collect();
            mse(y, &target)
        },
        |net| {
            let ck = JudgeCheckpoint::from_parts(probe.clone(), clone_net(net, &probe)?);
            ck.evaluate_regressor(test).map(|axes| JudgeMetrics::Regressor { axes })
        },
    )?;
    manifest.gate = gate(&metrics, config);
    manifest.metrics = metrics;
    manifest.epochs_completed = epochs;
    finish(JudgeCheckpoint::from_parts(manifest, net), out_dir)
}

/// Copy of `net` for read-only evaluation.
fn clone_net(net: &Sequential<f32>, m: &JudgeManifest) -> Result<Sequential<f32>> {
    let head = super::head_of(m)?;
    let mut copy = build_judge_net(&m.config, m.input_shape, &head);
    for (dst, src) in copy.state_mut().into_iter().zip(net.state()) {
        dst.copy_from_slice(src);
    }
    Ok(copy)
}
