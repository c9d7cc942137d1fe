use crate::Scalar;

/// Dense row-major tensor. Layers use `(N, F)` or `(N, C, H, W)` layouts.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![S::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?} does not match {} elements", data.len());
        Self { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn item(&self, i: usize) -> &[S] {
        let l = self.item_len();
        &self.data[i * l..(i + 1) * l]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len(), "reshape changes size");
        self.shape = shape.to_vec();
        self
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Concatenates two 4-D tensors along the channel axis.
    pub fn cat_channels(a: &Self, b: &Self) -> Self {
        let (n, ca, h, w) = dims4(a);
        let (nb, cb, hb, wb) = dims4(b);
        assert_eq!((n, h, w), (nb, hb, wb), "cat_channels: mismatched batch or spatial dims");
        let plane = h * w;
        let mut data = Vec::with_capacity(a.len() + b.len());
        for i in 0..n {
            data.extend_from_slice(&a.data[i * ca * plane..(i + 1) * ca * plane]);
            data.extend_from_slice(&b.data[i * cb * plane..(i + 1) * cb * plane]);
        }
        Self { shape: vec![n, ca + cb, h, w], data }
    }

    /// Keeps the first `c` channels of a 4-D tensor.
    pub fn take_channels(&self, c: usize) -> Self {
        let (n, ct, h, w) = dims4(self);
        assert!(c <= ct);
        let plane = h * w;
        let mut data = Vec::with_capacity(n * c * plane);
        for i in 0..n {
            data.extend_from_slice(&self.data[i * ct * plane..(i * ct + c) * plane]);
        }
        Self { shape: vec![n, c, h, w], data }
    }

    /// Concatenates two 2-D tensors along the feature axis.
    pub fn cat_features(a: &Self, b: &Self) -> Self {
        assert_eq!(a.shape.len(), 2);
        assert_eq!(b.shape.len(), 2);
        assert_eq!(a.shape[0], b.shape[0]);
        let (n, fa, fb) = (a.shape[0], a.shape[1], b.shape[1]);
        let mut data = Vec::with_capacity(n * (fa + fb));
        for i in 0..n {
            data.extend_from_slice(&a.data[i * fa..(i + 1) * fa]);
            data.extend_from_slice(&b.data[i * fb..(i + 1) * fb]);
        }
        Self { shape: vec![n, fa + fb], data }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn dims4<S>(t: &Tensor<S>) -> (usize, usize, usize, usize) {
    assert_eq!(t.shape.len(), 4, "expected a 4-D tensor, got shape {:?}", t.shape);
    (t.shape[0], t.shape[1], t.shape[2], t.shape[3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_concat_and_split() {
        let a = Tensor::<f32>::from_vec(&[2, 1, 1, 2], vec![1., 2., 3., 4.]);
        let b = Tensor::<f32>::from_vec(&[2, 2, 1, 2], vec![5., 6., 7., 8., 9., 10., 11., 12.]);
        let c = Tensor::cat_channels(&a, &b);
        assert_eq!(c.shape(), &[2, 3, 1, 2]);
        assert_eq!(c.data(), &[1., 2., 5., 6., 7., 8., 3., 4., 9., 10., 11., 12.]);
        assert_eq!(c.take_channels(1), a);
    }

    #[test]
    fn feature_concat() {
        let a = Tensor::<f64>::from_vec(&[2, 1], vec![1., 2.]);
        let b = Tensor::<f64>::from_vec(&[2, 2], vec![3., 4., 5., 6.]);
        assert_eq!(Tensor::cat_features(&a, &b).data(), &[1., 3., 4., 2., 5., 6.]);
    }
}
