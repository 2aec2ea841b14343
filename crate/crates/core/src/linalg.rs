//! Dense row-major matrices over real or complex scalars.
//!
//! [`Scalar`] abstracts the handful of operations the network layers need so
//! one layer implementation serves both complex networks and the real-valued
//! baseline. For `f64`, conjugation is the identity and the Wirtinger rules
//! collapse to ordinary real backpropagation.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::complex::Complex;
use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + Default
    + PartialEq
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    const IS_COMPLEX: bool;

    fn conj(self) -> Self;
    fn from_real(x: f64) -> Self;
    fn real(self) -> f64;
    fn imag(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;

    /// Writes `op(a) · op(b)` into the row-major `out`, adding to its current
    /// contents when `accumulate` is set.
    fn gemm(a: MatOp<'_, Self>, b: MatOp<'_, Self>, out: &mut [Self], accumulate: bool);
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    const IS_COMPLEX: bool = false;

    #[inline]
    fn conj(self) -> f64 {
        self
    }
    #[inline]
    fn from_real(x: f64) -> f64 {
        x
    }
    #[inline]
    fn real(self) -> f64 {
        self
    }
    #[inline]
    fn imag(self) -> f64 {
        0.0
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, s: f64) -> f64 {
        self * s
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn gemm(a: MatOp<'_, f64>, b: MatOp<'_, f64>, out: &mut [f64], accumulate: bool) {
        let (m, k) = a.shape();
        let (k2, n) = b.shape();
        assert_eq!(k, k2, "gemm inner dimensions");
        assert_eq!(out.len(), m * n, "gemm output size");
        let av = a.view(a.data);
        let bv = b.view(b.data);
        let mut cv = ArrayViewMut2::from_shape((m, n), out).expect("gemm output shape");
        general_mat_mul(1.0, &av, &bv, if accumulate { 1.0 } else { 0.0 }, &mut cv);
    }
}

impl Scalar for Complex {
    const ZERO: Complex = Complex::ZERO;
    const ONE: Complex = Complex::ONE;
    const IS_COMPLEX: bool = true;

    #[inline]
    fn conj(self) -> Complex {
        Complex::conj(self)
    }
    #[inline]
    fn from_real(x: f64) -> Complex {
        Complex::new(x, 0.0)
    }
    #[inline]
    fn real(self) -> f64 {
        self.re
    }
    #[inline]
    fn imag(self) -> f64 {
        self.im
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex::norm_sqr(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Complex {
        Complex::scale(self, s)
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex::is_finite(self)
    }

    /// Three real products on split planes (Gauss):
    /// `re = ArBr − AiBi`, `im = (Ar+Ai)(Br+Bi) − ArBr − AiBi`.
    fn gemm(a: MatOp<'_, Complex>, b: MatOp<'_, Complex>, out: &mut [Complex], accumulate: bool) {
        let (m, k) = a.shape();
        let (k2, n) = b.shape();
        assert_eq!(k, k2, "gemm inner dimensions");
        assert_eq!(out.len(), m * n, "gemm output size");

        let (ar, ai, asum) = a.planes();
        let (br, bi, bsum) = b.planes();

        let mut rr = vec![0.0; m * n];
        let mut ii = vec![0.0; m * n];
        let mut ss = vec![0.0; m * n];
        for (dst, x, y) in [
            (&mut rr, &ar, &br),
            (&mut ii, &ai, &bi),
            (&mut ss, &asum, &bsum),
        ] {
            let mut cv = ArrayViewMut2::from_shape((m, n), dst.as_mut_slice()).expect("gemm shape");
            general_mat_mul(1.0, &a.view(x), &b.view(y), 0.0, &mut cv);
        }

        for (idx, c) in out.iter_mut().enumerate() {
            let re = rr[idx] - ii[idx];
            let im = ss[idx] - rr[idx] - ii[idx];
            if accumulate {
                c.re += re;
                c.im += im;
            } else {
                *c = Complex::new(re, im);
            }
        }
    }
}

/// A borrowed matrix operand with an optional transpose and conjugation,
/// as consumed by [`Scalar::gemm`].
#[derive(Clone, Copy)]
pub struct MatOp<'a, S> {
    data: &'a [S],
    rows: usize,
    cols: usize,
    transpose: bool,
    conjugate: bool,
}

impl<'a, S: Scalar> MatOp<'a, S> {
    /// Wraps a row-major `rows × cols` buffer.
    pub fn new(data: &'a [S], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "operand buffer size");
        MatOp {
            data,
            rows,
            cols,
            transpose: false,
            conjugate: false,
        }
    }

    pub fn t(mut self) -> Self {
        self.transpose = !self.transpose;
        self
    }

    pub fn conj(mut self) -> Self {
        self.conjugate = !self.conjugate;
        self
    }

    /// Logical shape after the transpose flag is applied.
    pub fn shape(&self) -> (usize, usize) {
        if self.transpose {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn view<'b>(&self, plane: &'b [f64]) -> ArrayView2<'b, f64> {
        let v = ArrayView2::from_shape((self.rows, self.cols), plane).expect("operand shape");
        if self.transpose {
            v.reversed_axes()
        } else {
            v
        }
    }
}

impl MatOp<'_, Complex> {
    fn planes(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sign = if self.conjugate { -1.0 } else { 1.0 };
        let re: Vec<f64> = self.data.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.data.iter().map(|z| sign * z.im).collect();
        let sum = re.iter().zip(&im).map(|(a, b)| a + b).collect();
        (re, im, sum)
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

pub type CMatrix = Matrix<Complex>;

impl<S: Scalar> Matrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::mismatch("Matrix::new", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn op(&self) -> MatOp<'_, S> {
        MatOp::new(&self.data, self.rows, self.cols)
    }
}

/// `y_i = Σ_j A_ij x_j`.
pub fn matvec<S: Scalar>(a: &Matrix<S>, x: &[S]) -> Result<Vec<S>> {
    if a.cols() != x.len() {
        return Err(Error::mismatch("matvec", a.cols(), x.len()));
    }
    Ok((0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .fold(S::ZERO, |acc, (&w, &v)| acc + w * v)
        })
        .collect())
}
