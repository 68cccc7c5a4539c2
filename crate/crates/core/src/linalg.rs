//! Complex vector/matrix aliases and the Hermitian newtype.
//!
//! Everything is dense `nalgebra` storage over `Complex64`. The helpers here
//! are the handful of trace and quadratic-form kernels the closed forms use
//! over and over; they avoid materializing matrix products when only a
//! trace or a scalar is needed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::ops::Deref;

use crate::moments::MomentsError;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used when checking `A == Aᴴ` on construction.
const HERMITIAN_RTOL: f64 = 1e-10;

/// Square complex matrix with `A == Aᴴ` and a real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    /// Validates the Hermitian property (relative to the largest entry) and
    /// stores the exactly symmetrized matrix.
    pub fn new(m: CMatrix) -> Result<Self, MomentsError> {
        if !m.is_square() {
            return Err(MomentsError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let scale = max_abs(&m).max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if d > HERMITIAN_RTOL * scale {
                    return Err(MomentsError::NotHermitian { row: i, col: j });
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// `(A + Aᴴ)/2`, for products that are Hermitian only up to rounding.
    pub fn symmetrize(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(h)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self(CMatrix::from_diagonal_element(dim, dim, Complex64::new(s, 0.0)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(*d, 0.0);
        }
        Self(m)
    }

    /// `v·vᴴ`
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrize(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real trace.
    pub fn trace_re(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Copy with every off-diagonal entry set to zero.
    pub fn diagonal_part(&self) -> Self {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(self.0[(i, i)].re, 0.0);
        }
        Self(m)
    }

    pub fn add(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> Hermitian {
        Hermitian(&self.0 * Complex64::new(s, 0.0))
    }

    /// `self += s·other`
    pub fn add_scaled_assign(&mut self, s: f64, other: &Hermitian) {
        self.0.zip_apply(&other.0, |a, b| *a += b * s);
    }

    /// `self += s·v·vᴴ`
    pub fn add_outer_assign(&mut self, s: f64, v: &CVector) {
        let n = self.dim();
        for j in 0..n {
            let vj = v[j].conj() * s;
            for i in 0..n {
                self.0[(i, j)] += v[i] * vj;
            }
        }
    }

    /// `vᴴ·A·v`, real for Hermitian `A`.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        quad_form(&self.0, v).re
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

impl Deref for Hermitian {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Tr{A·B}` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr{(A + a·aᴴ)(B + b·bᴴ)}` for Hermitian `A`, `B`; real.
pub fn trace_second_moments(a: &Hermitian, a_mean: &CVector, b: &Hermitian, b_mean: &CVector) -> f64 {
    let ab = trace_product(a, b).re;
    let a_b = b.quad_form(a_mean);
    let b_a = a.quad_form(b_mean);
    let cross = a_mean.dotc(b_mean).norm_sqr();
    ab + a_b + b_a + cross
}

/// `xᴴ·A·y`
pub fn bilinear(x: &CVector, a: &CMatrix, y: &CVector) -> Complex64 {
    x.dotc(&(a * y))
}

/// `xᴴ·A·x`
pub fn quad_form(a: &CMatrix, x: &CVector) -> Complex64 {
    let n = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..n {
            col += x[i].conj() * a[(i, j)];
        }
        acc += col * x[j];
    }
    acc
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
