use crate::{Layer, Scalar, Tensor};

pub struct Relu<S> {
    cache: Option<Tensor<S>>,
}

impl<S> Default for Relu<S> {
    fn default() -> Self {
        Self { cache: None }
    }
}

impl<S: Scalar> Layer<S> for Relu<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        self.cache = Some(x.clone());
        self.infer(x)
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        x.map(|v| v.max(S::zero()))
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.as_ref().expect("relu: backward before forward");
        let d = x.data().iter().zip(grad_out.data()).map(|(&v, &g)| if v > S::zero() { g } else { S::zero() }).collect();
        Tensor::from_vec(x.shape(), d)
    }
}

pub struct LeakyRelu<S> {
    slope: S,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> LeakyRelu<S> {
    pub fn new(slope: f64) -> Self {
        Self { slope: S::from_f64(slope), cache: None }
    }
}

impl<S: Scalar> Layer<S> for LeakyRelu<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        self.cache = Some(x.clone());
        self.infer(x)
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let a = self.slope;
        x.map(|v| if v > S::zero() { v } else { a * v })
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.as_ref().expect("leaky relu: backward before forward");
        let a = self.slope;
        let d = x.data().iter().zip(grad_out.data()).map(|(&v, &g)| if v > S::zero() { g } else { a * g }).collect();
        Tensor::from_vec(x.shape(), d)
    }
}

/// Hyperbolic tangent; bounds outputs to [-1, 1].
pub struct Tanh<S> {
    cache: Option<Tensor<S>>,
}

impl<S> Default for Tanh<S> {
    fn default() -> Self {
        Self { cache: None }
    }
}

impl<S: Scalar> Layer<S> for Tanh<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let y = self.infer(x);
        self.cache = Some(y.clone());
        y
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        x.map(|v| v.tanh())
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let y = self.cache.as_ref().expect("tanh: backward before forward");
        let d = y.data().iter().zip(grad_out.data()).map(|(&t, &g)| g * (S::one() - t * t)).collect();
        Tensor::from_vec(y.shape(), d)
    }
}

/// Reinterprets each batch item with a new per-item shape.
pub struct Reshape {
    item_shape: Vec<usize>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(item_shape: &[usize]) -> Self {
        Self { item_shape: item_shape.to_vec(), input_shape: None }
    }

    fn target(&self, n: usize) -> Vec<usize> {
        let mut s = vec![n];
        s.extend_from_slice(&self.item_shape);
        s
    }
}

impl<S: Scalar> Layer<S> for Reshape {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        self.input_shape = Some(x.shape().to_vec());
        Layer::<S>::infer(self, x)
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        x.clone().reshape(&self.target(x.batch()))
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let shape = self.input_shape.as_ref().expect("reshape: backward before forward");
        grad_out.clone().reshape(shape)
    }
}
