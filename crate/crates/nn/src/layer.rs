use crate::{Scalar, Tensor};

/// A trainable parameter together with its accumulated gradient.
pub struct ParamMut<'a, S> {
    pub value: &'a mut [S],
    pub grad: &'a mut [S],
}

/// A differentiable layer.
///
/// `forward` runs in training mode and caches what `backward` needs;
/// `infer` is the side-effect-free evaluation path used after training.
/// Parameter gradients accumulate across `backward` calls until zeroed.
pub trait Layer<S: Scalar>: Send + Sync {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S>;

    fn infer(&self, x: &Tensor<S>) -> Tensor<S>;

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S>;

    fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        Vec::new()
    }

    /// Persistent state (parameters followed by buffers) in a fixed order.
    fn state(&self) -> Vec<&[S]> {
        Vec::new()
    }

    fn state_mut(&mut self) -> Vec<&mut [S]> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        for p in self.params() {
            p.grad.iter_mut().for_each(|g| *g = S::zero());
        }
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential<S: Scalar> {
    layers: Vec<Box<dyn Layer<S>>>,
}

impl<S: Scalar> Sequential<S> {
    pub fn new() -> Self {
        Self { layers: Vec::new() }
    }

    pub fn push(mut self, layer: impl Layer<S> + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.state().iter().map(|s| s.len()).sum()
    }
}

impl<S: Scalar> Layer<S> for Sequential<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h);
        }
        h
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h);
        }
        h
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let mut g = grad_out.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g);
        }
        g
    }

    fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    fn state(&self) -> Vec<&[S]> {
        self.layers.iter().flat_map(|l| l.state()).collect()
    }

    fn state_mut(&mut self) -> Vec<&mut [S]> {
        self.layers.iter_mut().flat_map(|l| l.state_mut()).collect()
    }
}
