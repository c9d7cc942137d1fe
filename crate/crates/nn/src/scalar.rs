use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type the layers are generic over.
///
/// Training runs in `f32`; `f64` exists so that finite-difference gradient
/// checks have enough precision to be meaningful.
pub trait Scalar: Float + Default + Debug + Sum + Send + Sync + 'static {
    /// `c <- alpha * a * b + beta * c` on strided row/column-major views.
    ///
    /// # Safety
    /// Every index reachable through the given dimensions and strides must be
    /// in bounds of the corresponding buffer.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(x: f64) -> f32 {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(x: f64) -> f64 {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Matrix operand: a dense row-major buffer, optionally read transposed.
#[derive(Clone, Copy)]
pub struct MatRef<'a, S> {
    pub data: &'a [S],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a, S> MatRef<'a, S> {
    pub fn new(data: &'a [S], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer/shape mismatch");
        Self { data, rows, cols, transposed: false }
    }

    pub fn t(self) -> Self {
        Self { transposed: !self.transposed, ..self }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `out <- a * b + beta * out`, `out` dense row-major.
pub fn gemm<S: Scalar>(a: MatRef<'_, S>, b: MatRef<'_, S>, beta: S, out: &mut [S]) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(out.len(), m * n, "output buffer/shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: shapes were checked against buffer lengths above and in MatRef::new.
    unsafe {
        S::gemm_raw(m, k, n, S::one(), a.data.as_ptr(), rsa, csa, b.data.as_ptr(), rsb, csb, beta, out.as_mut_ptr(), n as isize, 1);
    }
}
