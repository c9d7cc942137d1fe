use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::Scalar;

/// Fills `buf` with draws from N(mean, std²).
pub fn normal<S: Scalar, R: Rng + ?Sized>(buf: &mut [S], mean: f64, std: f64, rng: &mut R) {
    let dist = Normal::new(mean, std).expect("std must be finite and non-negative");
    for v in buf {
        *v = S::from_f64(dist.sample(rng));
    }
}

/// Fills `buf` with draws from U(-bound, bound).
pub fn uniform<S: Scalar, R: Rng + ?Sized>(buf: &mut [S], bound: f64, rng: &mut R) {
    let dist = Uniform::new_inclusive(-bound, bound).expect("bound must be finite");
    for v in buf {
        *v = S::from_f64(dist.sample(rng));
    }
}

/// He-uniform initialisation for layers followed by (leaky) ReLU.
pub fn kaiming_uniform<S: Scalar, R: Rng + ?Sized>(buf: &mut [S], fan_in: usize, rng: &mut R) {
    uniform(buf, (6.0 / fan_in as f64).sqrt(), rng);
}

pub fn standard_normal<S: Scalar, R: Rng + ?Sized>(rng: &mut R) -> S {
    S::from_f64(StandardNormal.sample(rng))
}
