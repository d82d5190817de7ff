//! Dense complex matrices and bosonic ladder operators on truncated Fock
//! spaces.
//!
//! Two-mode operators use the mode-a-left tensor convention: the basis state
//! `|i_a, i_b>` lives at composite index `i_a * cutoff_b + i_b`, so
//! `kron(op_a, op_b)` acts on mode a with `op_a`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix dimension `kron` will produce.
pub const MAX_DIM: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square dense complex matrix. Indexing is `(row, column)`.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::from_fn(dim, dim, f))
    }

    /// Builds a matrix from `dim * dim` entries given row by row.
    pub fn from_row_slice(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
        }
        Ok(Self::from_fn(u.len(), |i, j| u[i] * v[j].conj()))
    }

    pub fn from_inner(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() || inner.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "expected a non-empty square matrix, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        Ok(Self(inner))
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn inner_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_dim(other)?;
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        let n = self.dim();
        Ok((0..n).map(|i| (0..n).map(|j| self.0[(i, j)] * v[j]).sum()).collect())
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise `|self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff on matrices of different dimension");
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise `|M - M^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i..n).all(|j| (self.0[(i, j)] + self.0[(j, i)].conj()).norm() <= tol))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Eigenvalues of the Hermitian part `(M + M^dag)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let mut values: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{:?}", self.0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.0[idx]
    }
}

macro_rules! binary_op {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in matrix arithmetic");
                ComplexMatrix(&self.0 $op &rhs.0)
            }
        }

        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                &self $op &rhs
            }
        }
    };
}

binary_op!(Add, add, +);
binary_op!(Sub, sub, -);
binary_op!(Mul, mul, *);

/// `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// Truncated annihilation operator with `M[n, n+1] = sqrt(n+1)`.
pub fn annihilation(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("Fock cutoff must be at least 1".into()));
    }
    Ok(ComplexMatrix::from_fn(cutoff, |i, j| if j == i + 1 { Complex64::new((j as f64).sqrt(), 0.0) } else { ZERO }))
}

pub fn creation(cutoff: usize) -> Result<ComplexMatrix> {
    Ok(annihilation(cutoff)?.adjoint())
}

/// Number operator `diag(0, 1, ..., cutoff-1)`.
pub fn number(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("Fock cutoff must be at least 1".into()));
    }
    let diag: Vec<f64> = (0..cutoff).map(|n| n as f64).collect();
    Ok(ComplexMatrix::from_real_diagonal(&diag))
}

/// Kronecker product; `a` is the left (slow-index) factor.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (da, db) = (a.dim(), b.dim());
    let dim = da
        .checked_mul(db)
        .filter(|&d| d <= MAX_DIM)
        .ok_or(Error::DimensionOverflow { requested: da.saturating_mul(db), max: MAX_DIM })?;
    Ok(ComplexMatrix::from_fn(dim, |i, j| a[(i / db, j / db)] * b[(i % db, j % db)]))
}

/// Entrywise square root of a diagonal matrix with non-negative real diagonal.
pub fn diag_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    const TOL: f64 = 1e-12;
    if !m.is_diagonal(TOL) {
        return Err(Error::InvalidArgument("diag_sqrt requires a diagonal matrix".into()));
    }
    let mut roots = Vec::with_capacity(m.dim());
    for (i, d) in m.diagonal().into_iter().enumerate() {
        if d.im.abs() > TOL || d.re < -TOL {
            return Err(Error::InvalidArgument(format!(
                "diag_sqrt: diagonal entry {i} = {d} is not real non-negative"
            )));
        }
        roots.push(d.re.max(0.0).sqrt());
    }
    Ok(ComplexMatrix::from_real_diagonal(&roots))
}

/// `e^M` by Padé scaling and squaring.
pub fn matrix_exponential(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_finite() {
        return Err(Error::ExpmFailure("input has non-finite entries".into()));
    }
    if m.max_abs() == 0.0 {
        return Ok(ComplexMatrix::identity(m.dim()));
    }
    let out = ComplexMatrix(m.0.exp());
    if !out.is_finite() {
        return Err(Error::ExpmFailure(format!("result overflowed (input Frobenius norm {:e})", m.norm())));
    }
    Ok(out)
}

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub(crate) fn one() -> Complex64 {
    ONE
}
