//! Discriminator gradient probe on the smallest GAN configuration.

use interlerp::cgan::{build_discriminator, build_generator, discriminator_loss, GanConfig};
use interlerp_nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

pub fn smallest_config() -> GanConfig {
    GanConfig { z_dim: 8, base_channels: 4, batch_size: 4, ..GanConfig::new(2, [8, 8, 1], 2e-4, 1) }
}

fn one_hot_rows(labels: &[usize], n: usize) -> Tensor<f64> {
    let mut data = vec![0.0; labels.len() * n];
    for (i, &l) in labels.iter().enumerate() {
        data[i * n + l] = 1.0;
    }
    Tensor::from_vec(&[labels.len(), n], data)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// `(analytic, central difference)` for `probes` randomly chosen
/// discriminator weights, in f64.
pub fn discriminator_probes(seed: u64, probes: usize) -> Vec<(f64, f64)> {
    let cfg = smallest_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h, w, c] = cfg.image_shape;
    let b = cfg.batch_size;
    let real = Tensor::from_vec(&[b, c, h, w], (0..b * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect());
    let real_v = one_hot_rows(&(0..b).map(|i| i % 2).collect::<Vec<_>>(), 2);
    let z = Tensor::from_vec(&[b, cfg.z_dim], (0..b * cfg.z_dim).map(|_| rng.random_range(-2.0..2.0)).collect());
    let fake_v = one_hot_rows(&(0..b).map(|i| (i + 1) % 2).collect::<Vec<_>>(), 2);
    let fake = build_generator::<f64>(&cfg).infer(&z, &fake_v).unwrap();

    let mut d = build_discriminator::<f64>(&cfg);
    discriminator_loss(&mut d, &real, &real_v, &fake, &fake_v).unwrap();
    let analytic: Vec<Vec<f64>> = d.params().into_iter().map(|p| p.grad.to_vec()).collect();
    let mut out = Vec::with_capacity(probes);
    for _ in 0..probes {
        let pi = rng.random_range(0..analytic.len());
        let j = rng.random_range(0..analytic[pi].len());
        let mut at = |delta: f64| {
            d.params()[pi].value[j] += delta;
            discriminator_loss(&mut d, &real, &real_v, &fake, &fake_v).unwrap()
        };
        let lp = at(H);
        let lm = at(-2.0 * H);
        at(H);
        out.push((analytic[pi][j], (lp - lm) / (2.0 * H)));
    }
    out
}
