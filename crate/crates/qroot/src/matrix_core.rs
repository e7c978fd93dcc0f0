//! Dense complex matrices and vectors over a generic float scalar.
//!
//! Everything here is a pure function on owned values. Products skip zero
//! entries so that diagonal and permutation operators stay cheap even when
//! stored densely.

use std::fmt::{Debug, Display};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floating point element type: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance used for Hermiticity and unitarity checks.
    fn structural_tol() -> Self {
        Self::epsilon() * Self::from_f64(4500.0).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix is not Hermitian: max asymmetry {0:e}")]
    NotHermitian(f64),
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is singular (pivot magnitude {0:e})")]
    Singular(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("Jacobi sweeps did not converge after {0} sweeps")]
    NoConvergence(usize),
}

pub type MatrixResult<T> = Result<T, MatrixError>;

type SparseRows<T> = Vec<Vec<(usize, Complex<T>)>>;

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Exact base-2 logarithm of a power of two.
pub fn log2_exact(n: usize) -> MatrixResult<u32> {
    if is_power_of_two(n) {
        Ok(n.trailing_zeros())
    } else {
        Err(MatrixError::NotPowerOfTwo(n))
    }
}

fn c<T: Scalar>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

fn t_of<T: Scalar>(x: f64) -> T {
    T::from_f64(x).unwrap()
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CMatrixG<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

/// Dense complex vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CVectorG<T> {
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrixG<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data: values.iter().map(|&v| c(v)).collect() }
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let cl = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, cl, |i, j| c(rows[i][j]))
    }

    pub fn diag(values: &[Complex<T>]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn diag_real(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = c(*v);
        }
        m
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &CVectorG<T>, v: &CVectorG<T>) -> Self {
        Self::from_fn(u.dim(), v.dim(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        self.data
            .iter()
            .enumerate()
            .all(|(idx, z)| idx / n == idx % n || z.is_zero())
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn column(&self, j: usize) -> CVectorG<T> {
        CVectorG::new((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    pub fn row(&self, i: usize) -> CVectorG<T> {
        CVectorG::new(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal().into_iter().fold(Complex::zero(), |a, b| a + b)
    }

    /// Largest entry magnitude, the `‖·‖_max` norm.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
    }

    /// `‖self − other‖_max`; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.shape() != other.shape() {
            return T::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    /// `‖A − A†‖_max`.
    pub fn hermitian_asymmetry(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let n = self.rows;
        let mut m = T::zero();
        for i in 0..n {
            for j in i..n {
                m = m.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_asymmetry() <= tol
    }

    pub fn checked_add(&self, other: &Self) -> MatrixResult<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &Self) -> MatrixResult<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> MatrixResult<Self> {
        if self.shape() != other.shape() {
            return Err(MatrixError::DimensionMismatch { op, left: self.shape(), right: other.shape() });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Matrix product. Zero entries of either factor are skipped.
    pub fn matmul(&self, other: &Self) -> MatrixResult<Self> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let nnz_b = other.data.iter().filter(|z| !z.is_zero()).count();
        let sparse_rows: Option<SparseRows<T>> = if nnz_b * 2 < m * p {
            Some(
                (0..m)
                    .map(|k| {
                        (0..p)
                            .filter_map(|j| {
                                let v = other.data[k * p + j];
                                (!v.is_zero()).then_some((j, v))
                            })
                            .collect()
                    })
                    .collect(),
            )
        } else {
            None
        };
        let mut out = vec![Complex::<T>::zero(); n * p];
        let fill_row = |i: usize, row: &mut [Complex<T>]| {
            for k in 0..m {
                let a = self.data[i * m + k];
                if a.is_zero() {
                    continue;
                }
                match &sparse_rows {
                    Some(rows) => {
                        for &(j, b) in &rows[k] {
                            row[j] += a * b;
                        }
                    }
                    None => {
                        let brow = &other.data[k * p..(k + 1) * p];
                        for (r, b) in row.iter_mut().zip(brow) {
                            *r += a * *b;
                        }
                    }
                }
            }
        };
        if n * m * p >= 1 << 18 && p > 0 {
            out.par_chunks_mut(p).enumerate().for_each(|(i, row)| fill_row(i, row));
        } else if p > 0 {
            for (i, row) in out.chunks_mut(p).enumerate() {
                fill_row(i, row);
            }
        }
        Ok(Self { rows: n, cols: p, data: out })
    }

    pub fn mul_vec(&self, v: &CVectorG<T>) -> MatrixResult<CVectorG<T>> {
        if self.cols != v.dim() {
            return Err(MatrixError::DimensionMismatch {
                op: "mul_vec",
                left: self.shape(),
                right: (v.dim(), 1),
            });
        }
        let out = (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter()
                    .zip(v.entries())
                    .filter(|(a, _)| !a.is_zero())
                    .fold(Complex::zero(), |s, (a, b)| s + *a * *b)
            })
            .collect();
        Ok(CVectorG::new(out))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r1, c1) = self.shape();
        let (r2, c2) = other.shape();
        let mut out = Self::zeros(r1 * r2, c1 * c2);
        for i1 in 0..r1 {
            for j1 in 0..c1 {
                let a = self.get(i1, j1);
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..r2 {
                    for j2 in 0..c2 {
                        let b = other.get(i2, j2);
                        if !b.is_zero() {
                            out.set(i1 * r2 + i2, j1 * c2 + j2, a * b);
                        }
                    }
                }
            }
        }
        out
    }

    /// Unitarity residual `‖U†U − I‖_max`.
    pub fn unitarity_residual(&self) -> T {
        match self.adjoint().matmul(self) {
            Ok(p) => p.max_abs_diff(&Self::identity(self.cols)),
            Err(_) => T::infinity(),
        }
    }

    /// Upper triangular part check helper for tests: entries below the diagonal.
    pub fn lower_max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..i.min(self.cols) {
                m = m.max(self.get(i, j).norm());
            }
        }
        m
    }
}

impl<T: Scalar> Index<(usize, usize)> for CMatrixG<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for CMatrixG<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<'a, T: Scalar> Mul<&'a CMatrixG<T>> for &'a CMatrixG<T> {
    type Output = CMatrixG<T>;
    /// Panics on shape mismatch; use [`CMatrixG::matmul`] for a checked product.
    fn mul(self, rhs: &'a CMatrixG<T>) -> CMatrixG<T> {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl<'a, T: Scalar> Add<&'a CMatrixG<T>> for &'a CMatrixG<T> {
    type Output = CMatrixG<T>;
    fn add(self, rhs: &'a CMatrixG<T>) -> CMatrixG<T> {
        self.checked_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl<'a, T: Scalar> Sub<&'a CMatrixG<T>> for &'a CMatrixG<T> {
    type Output = CMatrixG<T>;
    fn sub(self, rhs: &'a CMatrixG<T>) -> CMatrixG<T> {
        self.checked_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl<T: Scalar> Neg for CMatrixG<T> {
    type Output = CMatrixG<T>;
    fn neg(self) -> CMatrixG<T> {
        self.map(|z| -z)
    }
}

impl<T: Scalar> CVectorG<T> {
    pub fn new(data: Vec<Complex<T>>) -> Self {
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![Complex::zero(); n] }
    }

    pub fn from_real(values: &[T]) -> Self {
        Self { data: values.iter().map(|&v| c(v)).collect() }
    }

    /// Computational basis vector `|j>` of dimension `n`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[j] = Complex::one();
        v
    }

    /// Uniform superposition `(1/√n) Σ |j>`.
    pub fn uniform(n: usize) -> Self {
        let a = T::one() / T::from_usize(n).unwrap().sqrt();
        Self { data: vec![c(a); n] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn real_parts(&self) -> Vec<T> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn norm(&self) -> T {
        self.data.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `<self|other>`, conjugate-linear in the first argument.
    pub fn dot(&self, other: &Self) -> Complex<T> {
        self.data.iter().zip(&other.data).fold(Complex::zero(), |s, (a, b)| s + a.conj() * *b)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { data: self.data.iter().map(|z| *z * s).collect() }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scale(c(T::one() / n))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.dim() != other.dim() {
            return T::infinity();
        }
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                out.push(*a * *b);
            }
        }
        Self { data: out }
    }
}

impl<T: Scalar> Index<usize> for CVectorG<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.data[i]
    }
}

impl<T: Scalar> IndexMut<usize> for CVectorG<T> {
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.data[i]
    }
}

/// Quantum Fourier transform matrix `F_n[j,k] = ω^{jk}/√n` with `ω = exp(−2πi/n)`.
pub fn qft<T: Scalar>(n: usize) -> MatrixResult<CMatrixG<T>> {
    log2_exact(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMatrixG::from_fn(n, n, |j, k| {
        let phase = -2.0 * std::f64::consts::PI * (((j * k) % n) as f64) / n as f64;
        Complex::new(t_of(scale * phase.cos()), t_of(scale * phase.sin()))
    }))
}

/// `H^{⊗q}`: entry `(j,k)` is `(−1)^{popcount(j & k)} / √(2^q)`.
pub fn hadamard_power<T: Scalar>(q: u32) -> CMatrixG<T> {
    let n = 1usize << q;
    let a: T = t_of(1.0 / (n as f64).sqrt());
    CMatrixG::from_fn(n, n, |j, k| {
        if (j & k).count_ones() % 2 == 0 {
            c(a)
        } else {
            c(-a)
        }
    })
}

/// Permutation swapping two `n`-dimensional registers: `|j>|k> ↦ |k>|j>`.
pub fn swap_operator<T: Scalar>(n: usize) -> CMatrixG<T> {
    let mut m = CMatrixG::zeros(n * n, n * n);
    for j in 0..n {
        for k in 0..n {
            m.set(k * n + j, j * n + k, Complex::one());
        }
    }
    m
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matrix whose columns are
/// the matching orthonormal eigenvectors.
pub fn eig_hermitian<T: Scalar>(a: &CMatrixG<T>) -> MatrixResult<(Vec<T>, CMatrixG<T>)> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare(a.rows(), a.cols()));
    }
    if !a.is_finite() {
        return Err(MatrixError::NonFinite);
    }
    let n = a.rows();
    let asym = a.hermitian_asymmetry();
    if asym > T::structural_tol() * T::one().max(a.max_abs()) {
        return Err(MatrixError::NotHermitian(asym.to_f64().unwrap()));
    }
    let half: T = t_of(0.5);
    let mut m = CMatrixG::from_fn(n, n, |i, j| (a.get(i, j) + a.get(j, i).conj()) * half);
    let mut v = CMatrixG::<T>::identity(n);
    let scale = m.frobenius();
    let tiny = T::min_positive_value();
    let target = T::epsilon() * scale;
    const MAX_SWEEPS: usize = 100;
    let mut converged = n <= 1 || scale <= tiny;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let b = apq.norm();
                if b <= target * t_of(1e-3) || b <= tiny {
                    continue;
                }
                let e = apq / b;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (b + b);
                let sgn = if tau >= T::zero() { T::one() } else { -T::one() };
                let t = sgn / (tau.abs() + (T::one() + tau * tau).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = t * cs;
                let ec = e.conj();
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, akp * cs - ec * akq * sn);
                    m.set(k, q, akp * sn + ec * akq * cs);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, apk * cs - e * aqk * sn);
                    m.set(q, k, apk * sn + e * aqk * cs);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * cs - ec * vkq * sn);
                    v.set(k, q, vkp * sn + ec * vkq * cs);
                }
                m.set(p, q, Complex::zero());
                m.set(q, p, Complex::zero());
                let (pp, qq) = (m.get(p, p).re, m.get(q, q).re);
                m.set(p, p, c(pp));
                m.set(q, q, c(qq));
            }
        }
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).norm_sqr();
            }
        }
        converged = off.sqrt() <= target;
    }
    if !converged {
        return Err(MatrixError::NoConvergence(MAX_SWEEPS));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).re.partial_cmp(&m.get(i, i).re).unwrap());
    let values = order.iter().map(|&i| m.get(i, i).re).collect();
    let vectors = CMatrixG::from_fn(n, n, |r, k| v.get(r, order[k]));
    Ok((values, vectors))
}

/// Applies a real function to the spectrum of a Hermitian matrix: `V f(Λ) V†`.
pub fn hermitian_function<T: Scalar>(
    a: &CMatrixG<T>,
    f: impl Fn(T) -> T,
) -> MatrixResult<CMatrixG<T>> {
    if a.is_diagonal() {
        let d: Vec<T> = a.diagonal().iter().map(|z| f(z.re)).collect();
        return Ok(CMatrixG::diag_real(&d));
    }
    let (vals, vecs) = eig_hermitian(a)?;
    let n = a.rows();
    let fv: Vec<T> = vals.iter().map(|&x| f(x)).collect();
    let scaled = CMatrixG::from_fn(n, n, |i, k| vecs.get(i, k) * fv[k]);
    scaled.matmul(&vecs.adjoint())
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(a: &CMatrixG<T>) -> MatrixResult<Vec<T>> {
    if a.is_diagonal() {
        let mut s: Vec<T> = a.diagonal().iter().map(|z| z.norm()).collect();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        return Ok(s);
    }
    let gram = if a.rows() >= a.cols() { a.adjoint().matmul(a)? } else { a.matmul(&a.adjoint())? };
    let (vals, _) = eig_hermitian(&gram)?;
    Ok(vals.into_iter().map(|l| l.max(T::zero()).sqrt()).collect())
}

/// Largest singular value. Exact for diagonal and small matrices; power
/// iteration on `A†A` beyond 256 rows or columns.
pub fn spectral_norm<T: Scalar>(a: &CMatrixG<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    if a.is_diagonal() {
        return a.diagonal().iter().fold(T::zero(), |m, z| m.max(z.norm()));
    }
    if a.rows().max(a.cols()) <= 256 {
        if let Ok(s) = singular_values(a) {
            return s[0];
        }
    }
    let n = a.cols();
    let adj = a.adjoint();
    let mut v = CVectorG::new(
        (0..n).map(|i| c(T::one() + t_of::<T>(0.013) * T::from_usize(i % 17).unwrap())).collect(),
    );
    v = v.normalized();
    let mut est = T::zero();
    for _ in 0..400 {
        let w = adj.mul_vec(&a.mul_vec(&v).unwrap()).unwrap();
        let nw = w.norm();
        if nw <= T::min_positive_value() {
            return T::zero();
        }
        let next = nw.sqrt();
        v = w.scale(c(T::one() / nw));
        if (next - est).abs() <= T::epsilon() * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Solves `A X = B` by LU factorisation with partial pivoting.
pub fn solve<T: Scalar>(a: &CMatrixG<T>, b: &CMatrixG<T>) -> MatrixResult<CMatrixG<T>> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare(a.rows(), a.cols()));
    }
    if a.rows() != b.rows() {
        return Err(MatrixError::DimensionMismatch { op: "solve", left: a.shape(), right: b.shape() });
    }
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(T::min_positive_value());
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, lu.get(r, col).norm()))
            .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag <= T::epsilon() * scale * T::from_usize(n).unwrap() {
            return Err(MatrixError::Singular(mag.to_f64().unwrap()));
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(piv, j));
                lu.set(piv, j, tmp);
            }
            for j in 0..m {
                let tmp = x.get(col, j);
                x.set(col, j, x.get(piv, j));
                x.set(piv, j, tmp);
            }
        }
        let d = lu.get(col, col);
        for r in (col + 1)..n {
            let f = lu.get(r, col) / d;
            if f.is_zero() {
                continue;
            }
            for j in col..n {
                let v = lu.get(r, j) - f * lu.get(col, j);
                lu.set(r, j, v);
            }
            for j in 0..m {
                let v = x.get(r, j) - f * x.get(col, j);
                x.set(r, j, v);
            }
        }
    }
    for j in 0..m {
        for r in (0..n).rev() {
            let mut s = x.get(r, j);
            for k in (r + 1)..n {
                s -= lu.get(r, k) * x.get(k, j);
            }
            x.set(r, j, s / lu.get(r, r));
        }
    }
    Ok(x)
}

pub fn solve_vec<T: Scalar>(a: &CMatrixG<T>, b: &CVectorG<T>) -> MatrixResult<CVectorG<T>> {
    let bm = CMatrixG::from_vec(b.dim(), 1, b.entries().to_vec());
    Ok(solve(a, &bm)?.column(0))
}

pub fn inverse<T: Scalar>(a: &CMatrixG<T>) -> MatrixResult<CMatrixG<T>> {
    solve(a, &CMatrixG::identity(a.rows()))
}

/// Solves a real dense system `A x = b`.
pub fn solve_real(a: &[Vec<f64>], b: &[f64]) -> MatrixResult<Vec<f64>> {
    let m = CMatrixG::<f64>::from_real_rows(a);
    let v = CVectorG::<f64>::from_real(b);
    Ok(solve_vec(&m, &v)?.real_parts())
}
