use crate::layer::ParamMut;
use crate::scalar::{gemm, MatRef};
use crate::{Layer, Scalar, Tensor};

/// Fully connected layer on `(N, F)` inputs.
pub struct Linear<S> {
    inputs: usize,
    outputs: usize,
    /// `(out, in)`
    weight: Vec<S>,
    bias: Vec<S>,
    weight_grad: Vec<S>,
    bias_grad: Vec<S>,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![S::zero(); inputs * outputs],
            bias: vec![S::zero(); outputs],
            weight_grad: vec![S::zero(); inputs * outputs],
            bias_grad: vec![S::zero(); outputs],
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight_mut(&mut self) -> &mut [S] {
        &mut self.weight
    }

    /// Row `o` of the weight matrix (the weights feeding output unit `o`).
    pub fn weight_row_mut(&mut self, o: usize) -> &mut [S] {
        &mut self.weight[o * self.inputs..(o + 1) * self.inputs]
    }
}

impl<S: Scalar> Layer<S> for Linear<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let y = self.infer(x);
        self.cache = Some(x.clone());
        y
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let n = x.batch();
        assert_eq!(x.item_len(), self.inputs, "linear: expected {} features", self.inputs);
        let mut y = Vec::with_capacity(n * self.outputs);
        for _ in 0..n {
            y.extend_from_slice(&self.bias);
        }
        gemm(MatRef::new(x.data(), n, self.inputs), MatRef::new(&self.weight, self.outputs, self.inputs).t(), S::one(), &mut y);
        Tensor::from_vec(&[n, self.outputs], y)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.as_ref().expect("linear: backward before forward");
        let n = x.batch();
        assert_eq!(grad_out.shape(), &[n, self.outputs]);
        for row in grad_out.data().chunks_exact(self.outputs) {
            for (b, &g) in self.bias_grad.iter_mut().zip(row) {
                *b = *b + g;
            }
        }
        gemm(MatRef::new(grad_out.data(), n, self.outputs).t(), MatRef::new(x.data(), n, self.inputs), S::one(), &mut self.weight_grad);
        let mut dx = vec![S::zero(); n * self.inputs];
        gemm(MatRef::new(grad_out.data(), n, self.outputs), MatRef::new(&self.weight, self.outputs, self.inputs), S::zero(), &mut dx);
        Tensor::from_vec(x.shape(), dx)
    }

    fn params(&mut self) -> Vec<ParamMut<'_, S>> {
        vec![
            ParamMut { value: &mut self.weight, grad: &mut self.weight_grad },
            ParamMut { value: &mut self.bias, grad: &mut self.bias_grad },
        ]
    }

    fn state(&self) -> Vec<&[S]> {
        vec![&self.weight, &self.bias]
    }

    fn state_mut(&mut self) -> Vec<&mut [S]> {
        vec![&mut self.weight, &mut self.bias]
    }
}
