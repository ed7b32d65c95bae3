//! Dense row-major tensors.
//!
//! Every differentiable op works on rank-2 tensors (`[rows, cols]`); higher
//! ranks only exist for storage and are reshaped to rank 2 before use.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use crate::error::{NnError, Result};

/// Element type of a tensor: `f32` for training, `f64` for gradient checks.
pub trait Scalar: Float + Default + Debug + Sum + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c += a · b` on raw strided storage; `c` is row-major with row stride `rsc`.
    ///
    /// # Safety
    /// All pointers must be valid for every element the shapes and strides address.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    );
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, 1);
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, 1);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::Shape {
                op: "new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Rank-2 tensor from a row-major buffer.
    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// `[1, n]` row vector.
    pub fn row(data: Vec<T>) -> Self {
        Self {
            shape: vec![1, data.len()],
            data,
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// The single value of a `[1, 1]` tensor.
    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(NnError::Shape {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }
}

/// `c += a · b` for an `[m,k]` by `[k,n]` product over strided views.
/// Strides are `(row, column)` element offsets.
#[allow(clippy::too_many_arguments)]
fn gemm_strided<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (rsa, csa): (usize, usize),
    b: &[T],
    (rsb, csb): (usize, usize),
    c: &mut [T],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(c.len() > last(m, n, n, 1));
    if k == 0 {
        return;
    }
    assert!(a.len() > last(m, k, rsa, csa) && b.len() > last(k, n, rsb, csb));
    // SAFETY: every index touched is bounded by the assertions above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            c.as_mut_ptr(),
            n as isize,
        );
    }
}

/// `out[m,n] += a[m,k] · b[k,n]`.
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    gemm_strided(m, k, n, a, (k, 1), b, (n, 1), out);
}

/// `out[m,k] += g[m,n] · b[k,n]ᵀ`.
pub(crate) fn gemm_nt<T: Scalar>(g: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    gemm_strided(m, n, k, g, (n, 1), b, (1, n), out);
}

/// `out[k,n] += a[m,k]ᵀ · g[m,n]`.
pub(crate) fn gemm_tn<T: Scalar>(a: &[T], g: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    gemm_strided(k, m, n, a, (1, k), g, (n, 1), out);
}
