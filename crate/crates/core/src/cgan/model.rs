use interlerp_nn::init::normal;
use interlerp_nn::{
    BatchNorm, Conv2d, ConvTranspose2d, Layer, LeakyRelu, Linear, ParamMut, Relu, Reshape, Scalar, Sequential, Tanh, Tensor,
};
use rand::Rng;

use super::GanConfig;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

const INIT_STD: f64 = 0.02;
const LEAK: f64 = 0.2;

/// Maps `(z, v)` to an image in `[-1, 1]`; `v` is concatenated to `z`
/// before the first projection.
pub struct Generator<S: Scalar> {
    net: Sequential<S>,
    z_dim: usize,
    n_classes: usize,
    shape: [usize; 3],
}

/// Scores `(image, v)` with a real-vs-fake logit; `v` enters as `n` constant
/// channels appended to the image.
pub struct Discriminator<S: Scalar> {
    net: Sequential<S>,
    n_classes: usize,
    shape: [usize; 3],
}

fn bn<S: Scalar>(channels: usize, rng: &mut impl Rng) -> BatchNorm<S> {
    let mut b = BatchNorm::new(channels);
    normal(b.gamma_mut(), 1.0, INIT_STD, rng);
    b
}

pub fn build_generator<S: Scalar>(config: &GanConfig) -> Generator<S> {
    let mut rng = substream(config.seed, &[domain::INIT, 0]);
    let ups = config.upsamplings();
    let s0 = config.seed_size();
    let widest = config.base_channels << (ups - 1);

    let mut proj = Linear::new(config.z_dim + config.n_classes, widest * s0 * s0);
    normal(proj.weight_mut(), 0.0, INIT_STD, &mut rng);
    let mut net = Sequential::new().push(proj).push(Reshape::new(&[widest, s0, s0])).push(bn(widest, &mut rng)).push(Relu::default());

    let mut cin = widest;
    for i in 0..ups {
        let last = i + 1 == ups;
        let cout = if last { config.channels() } else { cin / 2 };
        let mut up = ConvTranspose2d::new(cin, cout, 4, 2, 1);
        normal(up.weight_mut(), 0.0, INIT_STD, &mut rng);
        net = net.push(up);
        net = if last { net.push(Tanh::default()) } else { net.push(bn(cout, &mut rng)).push(Relu::default()) };
        cin = cout;
    }
    Generator { net, z_dim: config.z_dim, n_classes: config.n_classes, shape: config.image_shape }
}

pub fn build_discriminator<S: Scalar>(config: &GanConfig) -> Discriminator<S> {
    let mut rng = substream(config.seed, &[domain::INIT, 1]);
    let ups = config.upsamplings();
    let mut net = Sequential::new();
    let mut cin = config.channels() + config.n_classes;
    let mut cout = config.base_channels;
    let mut side = config.height();
    for _ in 0..ups {
        let mut conv = Conv2d::new(cin, cout, 4, 2, 1);
        normal(conv.weight_mut(), 0.0, INIT_STD, &mut rng);
        net = net.push(conv).push(LeakyRelu::new(LEAK));
        side /= 2;
        cin = cout;
        cout *= 2;
    }
    let mut head = Linear::new(cin * side * side, 1);
    normal(head.weight_mut(), 0.0, INIT_STD, &mut rng);
    Discriminator { net: net.push(head), n_classes: config.n_classes, shape: config.image_shape }
}

/// `(N, n)` conditioning rows as `n` constant `H x W` planes.
fn broadcast_labels<S: Scalar>(v: &Tensor<S>, h: usize, w: usize) -> Tensor<S> {
    let (n, k) = (v.batch(), v.item_len());
    let plane = h * w;
    let mut data = Vec::with_capacity(n * k * plane);
    for i in 0..n {
        for &x in v.item(i) {
            data.extend(std::iter::repeat_n(x, plane));
        }
    }
    Tensor::from_vec(&[n, k, h, w], data)
}

impl<S: Scalar> Generator<S> {
    fn input(&self, z: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        if z.shape() != [z.batch(), self.z_dim] {
            return Err(Error::Shape(format!("noise shape {:?}, expected (N, {})", z.shape(), self.z_dim)));
        }
        if v.shape() != [z.batch(), self.n_classes] {
            return Err(Error::Shape(format!("conditioning shape {:?}, expected ({}, {})", v.shape(), z.batch(), self.n_classes)));
        }
        Ok(Tensor::cat_features(z, v))
    }

    /// Training-mode pass (batch statistics, caches for `backward`).
    pub fn forward(&mut self, z: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        let x = self.input(z, v)?;
        Ok(self.net.forward(&x))
    }

    /// Evaluation pass using running batch-norm statistics.
    pub fn infer(&self, z: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.net.infer(&self.input(z, v)?))
    }

    pub fn backward(&mut self, grad_out: &Tensor<S>) {
        self.net.backward(grad_out);
    }

    pub fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        self.net.params()
    }

    pub fn zero_grad(&mut self) {
        self.net.zero_grad();
    }

    pub fn net(&self) -> &Sequential<S> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential<S> {
        &mut self.net
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// `[H, W, C]` of generated images.
    pub fn image_shape(&self) -> [usize; 3] {
        self.shape
    }
}

impl<S: Scalar> Discriminator<S> {
    fn input(&self, x: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        let [h, w, c] = self.shape;
        if x.shape() != [x.batch(), c, h, w] {
            return Err(Error::Shape(format!("image batch shape {:?}, expected (N, {c}, {h}, {w})", x.shape())));
        }
        if v.shape() != [x.batch(), self.n_classes] {
            return Err(Error::Shape(format!("conditioning shape {:?}, expected ({}, {})", v.shape(), x.batch(), self.n_classes)));
        }
        Ok(Tensor::cat_channels(x, &broadcast_labels(v, h, w)))
    }

    /// Logits `(N, 1)` in training mode.
    pub fn forward(&mut self, x: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        let input = self.input(x, v)?;
        Ok(self.net.forward(&input))
    }

    pub fn infer(&self, x: &Tensor<S>, v: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.net.infer(&self.input(x, v)?))
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the image channels only.
    pub fn backward(&mut self, grad_logits: &Tensor<S>) -> Tensor<S> {
        self.net.backward(grad_logits).take_channels(self.shape[2])
    }

    pub fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        self.net.params()
    }

    pub fn zero_grad(&mut self) {
        self.net.zero_grad();
    }

    pub fn net(&self) -> &Sequential<S> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Sequential<S> {
        &mut self.net
    }
}

/// Discriminator loss `BCE(D(real), 1) + BCE(D(fake), 0)`; leaves the
/// parameter gradients of exactly this loss in `d`.
pub fn discriminator_loss<S: Scalar>(
    d: &mut Discriminator<S>,
    real: &Tensor<S>,
    real_v: &Tensor<S>,
    fake: &Tensor<S>,
    fake_v: &Tensor<S>,
) -> Result<S> {
    d.zero_grad();
    let logits = d.forward(real, real_v)?;
    let (lr, g) = interlerp_nn::loss::bce_with_logits(&logits, S::one());
    d.backward(&g);
    let logits = d.forward(fake, fake_v)?;
    let (lf, g) = interlerp_nn::loss::bce_with_logits(&logits, S::zero());
    d.backward(&g);
    Ok(lr + lf)
}
