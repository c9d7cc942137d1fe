use crate::layer::ParamMut;
use crate::{Layer, Scalar, Tensor};

/// Batch normalisation over the channel axis of `(N, C)` or `(N, C, H, W)`.
///
/// Training uses batch statistics and updates running estimates;
/// `infer` uses the running estimates, so each sample is processed
/// independently of the rest of its batch.
pub struct BatchNorm<S> {
    channels: usize,
    eps: S,
    momentum: S,
    gamma: Vec<S>,
    beta: Vec<S>,
    gamma_grad: Vec<S>,
    beta_grad: Vec<S>,
    running_mean: Vec<S>,
    running_var: Vec<S>,
    cache: Option<(Vec<S>, Vec<S>, Vec<usize>)>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            eps: S::from_f64(1e-5),
            momentum: S::from_f64(0.1),
            gamma: vec![S::one(); channels],
            beta: vec![S::zero(); channels],
            gamma_grad: vec![S::zero(); channels],
            beta_grad: vec![S::zero(); channels],
            running_mean: vec![S::zero(); channels],
            running_var: vec![S::one(); channels],
            cache: None,
        }
    }

    pub fn gamma_mut(&mut self) -> &mut [S] {
        &mut self.gamma
    }

    fn plane(&self, x: &Tensor<S>) -> (usize, usize) {
        assert!(x.shape().len() >= 2 && x.shape()[1] == self.channels, "batch norm: expected {} channels", self.channels);
        (x.batch(), x.item_len() / self.channels)
    }
}

impl<S: Scalar> Layer<S> for BatchNorm<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let (n, p) = self.plane(x);
        let c = self.channels;
        let count = S::from_f64((n * p) as f64);
        let mut xhat = vec![S::zero(); x.len()];
        let mut inv_std = vec![S::zero(); c];
        let mut y = vec![S::zero(); x.len()];
        let d = x.data();
        for ch in 0..c {
            let idx = |b: usize| (b * c + ch) * p;
            let mut sum = S::zero();
            for b in 0..n {
                sum = sum + d[idx(b)..idx(b) + p].iter().copied().sum::<S>();
            }
            let mean = sum / count;
            let mut sq = S::zero();
            for b in 0..n {
                sq = sq + d[idx(b)..idx(b) + p].iter().map(|&v| (v - mean) * (v - mean)).sum::<S>();
            }
            let var = sq / count;
            let is = S::one() / (var + self.eps).sqrt();
            inv_std[ch] = is;
            for b in 0..n {
                for i in idx(b)..idx(b) + p {
                    let h = (d[i] - mean) * is;
                    xhat[i] = h;
                    y[i] = self.gamma[ch] * h + self.beta[ch];
                }
            }
            let unbiased = if n * p > 1 { var * count / (count - S::one()) } else { var };
            let m = self.momentum;
            self.running_mean[ch] = (S::one() - m) * self.running_mean[ch] + m * mean;
            self.running_var[ch] = (S::one() - m) * self.running_var[ch] + m * unbiased;
        }
        self.cache = Some((xhat, inv_std, x.shape().to_vec()));
        Tensor::from_vec(x.shape(), y)
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let (n, p) = self.plane(x);
        let c = self.channels;
        let mut y = x.data().to_vec();
        for ch in 0..c {
            let is = S::one() / (self.running_var[ch] + self.eps).sqrt();
            let scale = self.gamma[ch] * is;
            let shift = self.beta[ch] - self.running_mean[ch] * scale;
            for b in 0..n {
                for v in &mut y[(b * c + ch) * p..(b * c + ch + 1) * p] {
                    *v = *v * scale + shift;
                }
            }
        }
        Tensor::from_vec(x.shape(), y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let (xhat, inv_std, shape) = self.cache.as_ref().expect("batch norm: backward before forward");
        assert_eq!(grad_out.shape(), &shape[..]);
        let c = self.channels;
        let n = shape[0];
        let p = grad_out.item_len() / c;
        let count = S::from_f64((n * p) as f64);
        let g = grad_out.data();
        let mut dx = vec![S::zero(); g.len()];
        for ch in 0..c {
            let idx = |b: usize| (b * c + ch) * p;
            let mut sum_g = S::zero();
            let mut sum_gx = S::zero();
            for b in 0..n {
                for i in idx(b)..idx(b) + p {
                    sum_g = sum_g + g[i];
                    sum_gx = sum_gx + g[i] * xhat[i];
                }
            }
            self.gamma_grad[ch] = self.gamma_grad[ch] + sum_gx;
            self.beta_grad[ch] = self.beta_grad[ch] + sum_g;
            let k = self.gamma[ch] * inv_std[ch] / count;
            for b in 0..n {
                for i in idx(b)..idx(b) + p {
                    dx[i] = k * (count * g[i] - sum_g - xhat[i] * sum_gx);
                }
            }
        }
        Tensor::from_vec(shape, dx)
    }

    fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        vec![ParamMut { value: &mut self.gamma, grad: &mut self.gamma_grad }, ParamMut { value: &mut self.beta, grad: &mut self.beta_grad }]
    }

    fn state(&self) -> Vec<&[S]> {
        vec![&self.gamma, &self.beta, &self.running_mean, &self.running_var]
    }

    fn state_mut(&mut self) -> Vec<&mut [S]> {
        vec![&mut self.gamma, &mut self.beta, &mut self.running_mean, &mut self.running_var]
    }
}
