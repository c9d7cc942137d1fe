use crate::layer::ParamMut;
use crate::Scalar;

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    step: i32,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr: S::from_f64(lr),
            beta1: S::from_f64(beta1),
            beta2: S::from_f64(beta2),
            eps: S::from_f64(1e-8),
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Applies one update. `params` must be presented in the same order on every call.
    pub fn step(&mut self, params: Vec<ParamMut<'_, S>>) {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![S::zero(); p.value.len()]).collect();
            self.second = self.first.clone();
        }
        assert_eq!(params.len(), self.first.len(), "adam: parameter set changed between steps");
        self.step += 1;
        let c1 = S::one() - self.beta1.powi(self.step);
        let c2 = S::one() - self.beta2.powi(self.step);
        for ((p, m), v) in params.into_iter().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (S::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (S::one() - self.beta2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.value[i] = p.value[i] - self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}
