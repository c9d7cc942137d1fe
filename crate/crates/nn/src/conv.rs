//! 2-D convolution and transposed convolution via im2col + GEMM.

use crate::layer::ParamMut;
use crate::scalar::{gemm, MatRef};
use crate::tensor::dims4;
use crate::{Layer, Scalar, Tensor};

/// Sliding-window geometry of a convolution over a `(c, h, w)` image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Window {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Window {
    fn new(c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Self {
        assert!(h + 2 * pad >= k && w + 2 * pad >= k, "kernel larger than padded input");
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Self { c, h, w, k, stride, pad, oh, ow }
    }

    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    /// Input coordinate hit by output coordinate `o` at kernel offset `kk`.
    #[inline]
    fn src(&self, o: usize, kk: usize, limit: usize) -> Option<usize> {
        let i = (o * self.stride + kk) as isize - self.pad as isize;
        (i >= 0 && (i as usize) < limit).then_some(i as usize)
    }
}

/// `(n, c, h, w)` image batch -> `(c*k*k, n*oh*ow)` patch matrix.
fn im2col<S: Scalar>(x: &[S], n: usize, g: &Window) -> Vec<S> {
    let ncol = n * g.oh * g.ow;
    let mut cols = vec![S::zero(); g.rows() * ncol];
    for c in 0..g.c {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let base = row * ncol;
                for b in 0..n {
                    let plane = &x[(b * g.c + c) * g.h * g.w..(b * g.c + c + 1) * g.h * g.w];
                    for oy in 0..g.oh {
                        let Some(iy) = g.src(oy, ki, g.h) else { continue };
                        let dst = base + (b * g.oh + oy) * g.ow;
                        let src_row = &plane[iy * g.w..(iy + 1) * g.w];
                        for ox in 0..g.ow {
                            if let Some(ix) = g.src(ox, kj, g.w) {
                                cols[dst + ox] = src_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-and-adds patch columns back into an image batch.
fn col2im<S: Scalar>(cols: &[S], n: usize, g: &Window) -> Vec<S> {
    let ncol = n * g.oh * g.ow;
    let mut x = vec![S::zero(); n * g.c * g.h * g.w];
    for c in 0..g.c {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let base = row * ncol;
                for b in 0..n {
                    let off = (b * g.c + c) * g.h * g.w;
                    for oy in 0..g.oh {
                        let Some(iy) = g.src(oy, ki, g.h) else { continue };
                        let src = base + (b * g.oh + oy) * g.ow;
                        for ox in 0..g.ow {
                            if let Some(ix) = g.src(ox, kj, g.w) {
                                x[off + iy * g.w + ix] = x[off + iy * g.w + ix] + cols[src + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `(n, c, p)` -> `(c, n*p)`.
fn batch_to_channel_major<S: Scalar>(x: &[S], n: usize, c: usize, p: usize) -> Vec<S> {
    let mut out = vec![S::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            out[ch * n * p + b * p..ch * n * p + (b + 1) * p].copy_from_slice(&x[(b * c + ch) * p..(b * c + ch + 1) * p]);
        }
    }
    out
}

/// `(c, n*p)` -> `(n, c, p)`, adding a per-channel bias.
fn channel_major_to_batch<S: Scalar>(m: &[S], n: usize, c: usize, p: usize, bias: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); m.len()];
    for ch in 0..c {
        let bv = bias[ch];
        for b in 0..n {
            let src = &m[ch * n * p + b * p..ch * n * p + (b + 1) * p];
            let dst = &mut out[(b * c + ch) * p..(b * c + ch + 1) * p];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s + bv;
            }
        }
    }
    out
}

fn channel_sums<S: Scalar>(g: &[S], n: usize, c: usize, p: usize, acc: &mut [S]) {
    for b in 0..n {
        for ch in 0..c {
            let s: S = g[(b * c + ch) * p..(b * c + ch + 1) * p].iter().copied().sum();
            acc[ch] = acc[ch] + s;
        }
    }
}

/// Square-kernel 2-D convolution with bias.
pub struct Conv2d<S> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    /// `(out, in*k*k)`
    weight: Vec<S>,
    bias: Vec<S>,
    weight_grad: Vec<S>,
    bias_grad: Vec<S>,
    cache: Option<(Vec<S>, usize, Window)>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        let wlen = out_channels * in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            weight: vec![S::zero(); wlen],
            bias: vec![S::zero(); out_channels],
            weight_grad: vec![S::zero(); wlen],
            bias_grad: vec![S::zero(); out_channels],
            cache: None,
        }
    }

    /// Fan-in of each output unit, for initialisation.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn weight_mut(&mut self) -> &mut [S] {
        &mut self.weight
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let g = Window::new(self.in_channels, h, w, self.kernel, self.stride, self.pad);
        (g.oh, g.ow)
    }

    fn window(&self, x: &Tensor<S>) -> (usize, Window) {
        let (n, c, h, w) = dims4(x);
        assert_eq!(c, self.in_channels, "conv2d: expected {} input channels, got {c}", self.in_channels);
        (n, Window::new(c, h, w, self.kernel, self.stride, self.pad))
    }

    fn apply(&self, cols: &[S], n: usize, g: &Window) -> Tensor<S> {
        let p = g.oh * g.ow;
        let mut m = vec![S::zero(); self.out_channels * n * p];
        gemm(MatRef::new(&self.weight, self.out_channels, g.rows()), MatRef::new(cols, g.rows(), n * p), S::zero(), &mut m);
        let out = channel_major_to_batch(&m, n, self.out_channels, p, &self.bias);
        Tensor::from_vec(&[n, self.out_channels, g.oh, g.ow], out)
    }
}

impl<S: Scalar> Layer<S> for Conv2d<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let (n, g) = self.window(x);
        let cols = im2col(x.data(), n, &g);
        let y = self.apply(&cols, n, &g);
        self.cache = Some((cols, n, g));
        y
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let (n, g) = self.window(x);
        let cols = im2col(x.data(), n, &g);
        self.apply(&cols, n, &g)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let (cols, n, g) = self.cache.as_ref().expect("conv2d: backward before forward");
        let (n, g) = (*n, *g);
        let p = g.oh * g.ow;
        assert_eq!(grad_out.shape(), &[n, self.out_channels, g.oh, g.ow]);
        let gm = batch_to_channel_major(grad_out.data(), n, self.out_channels, p);
        channel_sums(grad_out.data(), n, self.out_channels, p, &mut self.bias_grad);
        gemm(MatRef::new(&gm, self.out_channels, n * p), MatRef::new(cols, g.rows(), n * p).t(), S::one(), &mut self.weight_grad);
        let mut dcols = vec![S::zero(); g.rows() * n * p];
        gemm(MatRef::new(&self.weight, self.out_channels, g.rows()).t(), MatRef::new(&gm, self.out_channels, n * p), S::zero(), &mut dcols);
        Tensor::from_vec(&[n, g.c, g.h, g.w], col2im(&dcols, n, &g))
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

/// Square-kernel transposed convolution (fractionally strided), the
/// adjoint of [`Conv2d`] with the same kernel/stride/padding.
///
/// Output size is `(h - 1) * stride - 2 * pad + kernel`.
pub struct ConvTranspose2d<S> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    /// `(in, out*k*k)`
    weight: Vec<S>,
    bias: Vec<S>,
    weight_grad: Vec<S>,
    bias_grad: Vec<S>,
    cache: Option<(Vec<S>, usize, Window)>,
}

impl<S: Scalar> ConvTranspose2d<S> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        let wlen = in_channels * out_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            weight: vec![S::zero(); wlen],
            bias: vec![S::zero(); out_channels],
            weight_grad: vec![S::zero(); wlen],
            bias_grad: vec![S::zero(); out_channels],
            cache: None,
        }
    }

    pub fn weight_mut(&mut self) -> &mut [S] {
        &mut self.weight
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) * self.stride + self.kernel - 2 * self.pad, (w - 1) * self.stride + self.kernel - 2 * self.pad)
    }

    /// The window of the equivalent forward convolution, whose input is
    /// this layer's output.
    fn window(&self, x: &Tensor<S>) -> (usize, Window) {
        let (n, c, h, w) = dims4(x);
        assert_eq!(c, self.in_channels, "conv_transpose2d: expected {} input channels, got {c}", self.in_channels);
        let (oh, ow) = self.output_size(h, w);
        let g = Window::new(self.out_channels, oh, ow, self.kernel, self.stride, self.pad);
        debug_assert_eq!((g.oh, g.ow), (h, w));
        (n, g)
    }

    fn apply(&self, xm: &[S], n: usize, g: &Window) -> Tensor<S> {
        let p = g.oh * g.ow;
        let mut cols = vec![S::zero(); g.rows() * n * p];
        gemm(MatRef::new(&self.weight, self.in_channels, g.rows()).t(), MatRef::new(xm, self.in_channels, n * p), S::zero(), &mut cols);
        let mut y = col2im(&cols, n, g);
        let plane = g.h * g.w;
        for b in 0..n {
            for c in 0..self.out_channels {
                let bv = self.bias[c];
                y[(b * self.out_channels + c) * plane..(b * self.out_channels + c + 1) * plane].iter_mut().for_each(|v| *v = *v + bv);
            }
        }
        Tensor::from_vec(&[n, self.out_channels, g.h, g.w], y)
    }
}

impl<S: Scalar> Layer<S> for ConvTranspose2d<S> {
    fn forward(&mut self, x: &Tensor<S>) -> Tensor<S> {
        let (n, g) = self.window(x);
        let xm = batch_to_channel_major(x.data(), n, self.in_channels, g.oh * g.ow);
        let y = self.apply(&xm, n, &g);
        self.cache = Some((xm, n, g));
        y
    }

    fn infer(&self, x: &Tensor<S>) -> Tensor<S> {
        let (n, g) = self.window(x);
        let xm = batch_to_channel_major(x.data(), n, self.in_channels, g.oh * g.ow);
        self.apply(&xm, n, &g)
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let (xm, n, g) = self.cache.as_ref().expect("conv_transpose2d: backward before forward");
        let (n, g) = (*n, *g);
        let p = g.oh * g.ow;
        assert_eq!(grad_out.shape(), &[n, self.out_channels, g.h, g.w]);
        channel_sums(grad_out.data(), n, self.out_channels, g.h * g.w, &mut self.bias_grad);
        let gcols = im2col(grad_out.data(), n, &g);
        gemm(MatRef::new(xm, self.in_channels, n * p), MatRef::new(&gcols, g.rows(), n * p).t(), S::one(), &mut self.weight_grad);
        let mut dxm = vec![S::zero(); self.in_channels * n * p];
        gemm(MatRef::new(&self.weight, self.in_channels, g.rows()), MatRef::new(&gcols, g.rows(), n * p), S::zero(), &mut dxm);
        let zero_bias = vec![S::zero(); self.in_channels];
        let dx = channel_major_to_batch(&dxm, n, self.in_channels, p, &zero_bias);
        Tensor::from_vec(&[n, self.in_channels, g.oh, g.ow], dx)
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

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 7-loop convolution used as the reference.
    fn naive_conv(
        x: &[f64],
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        wt: &[f64],
        b: &[f64],
        co: usize,
        k: usize,
        s: usize,
        p: usize,
    ) -> Vec<f64> {
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (w + 2 * p - k) / s + 1;
        let mut out = vec![0.0; n * co * oh * ow];
        for bi in 0..n {
            for o in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[o];
                        for ci in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * s + ki) as isize - p as isize;
                                    let ix = (ox * s + kj) as isize - p as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        acc +=
                                            wt[((o * c + ci) * k + ki) * k + kj] * x[((bi * c + ci) * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                        }
                        out[((bi * co + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn filled(len: usize, seed: f64) -> Vec<f64> {
        (0..len).map(|i| ((i as f64 + seed) * 0.7311).sin()).collect()
    }

    #[test]
    fn conv_matches_direct_loops() {
        let (n, c, h, w, co, k, s, p) = (2, 3, 6, 5, 4, 3, 2, 1);
        let mut conv = Conv2d::<f64>::new(c, co, k, s, p);
        conv.weight.copy_from_slice(&filled(co * c * k * k, 1.0));
        conv.bias.copy_from_slice(&filled(co, 2.0));
        let x = filled(n * c * h * w, 3.0);
        let y = conv.infer(&Tensor::from_vec(&[n, c, h, w], x.clone()));
        let want = naive_conv(&x, n, c, h, w, &conv.weight, &conv.bias, co, k, s, p);
        assert_eq!(y.shape(), &[n, co, 3, 3]);
        for (a, b) in y.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> when both share the same kernel and no bias.
        let (n, ci, co, h, k, s, p) = (2, 3, 2, 8, 4, 2, 1);
        let mut conv = Conv2d::<f64>::new(ci, co, k, s, p);
        let wt = filled(co * ci * k * k, 0.5);
        conv.weight.copy_from_slice(&wt);
        let mut convt = ConvTranspose2d::<f64>::new(co, ci, k, s, p);
        // conv weight is (co, ci*k*k); convT weight is (in=co, out=ci*k*k): same buffer.
        convt.weight.copy_from_slice(&wt);

        let x = Tensor::from_vec(&[n, ci, h, h], filled(n * ci * h * h, 4.0));
        let cx = conv.infer(&x);
        let y = Tensor::from_vec(cx.shape(), filled(cx.len(), 9.0));
        let ty = convt.infer(&y);
        assert_eq!(ty.shape(), x.shape());
        let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(ty.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn transposed_output_sizes() {
        let t = ConvTranspose2d::<f32>::new(1, 1, 4, 2, 1);
        assert_eq!(t.output_size(7, 7), (14, 14));
        assert_eq!(t.output_size(4, 4), (8, 8));
        let c = Conv2d::<f32>::new(1, 1, 4, 2, 1);
        assert_eq!(c.output_size(28, 28), (14, 14));
    }
}
