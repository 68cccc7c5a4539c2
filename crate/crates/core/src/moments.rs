//! Complex-Gaussian vector kernel.
//!
//! Sampling from CN(m, Σ), and the closed-form quadratic and quartic moment
//! identities the ergodic-SE approximations are assembled from:
//!
//! - `E[xᴴAx] = Tr{A(Σ + mmᴴ)}`
//! - `E[xxᴴ] = Σ + mmᴴ`
//! - `E[(Ax+a)ᴴ(Bx+b)(Cx+c)ᴴ(Dx+d)]` (four-term expansion, see
//!   [`quartic_expectation`])
//! - `E[‖x‖⁴] = Tr{Σ²} + 2mᴴΣm + (Tr{Σ} + ‖m‖²)²`
//!
//! All distributions are circularly symmetric: the covariance is
//! `E[(x−m)(x−m)ᴴ]` and the pseudo-covariance is zero.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{frobenius, quad_form, trace_product, CMatrix, CVector, Hermitian};
use crate::rng::standard_complex_normal;

/// Relative PSD tolerance: eigenvalues down to `-PSD_EPS * Tr{Σ}/dim` are
/// clipped to zero, anything more negative is rejected.
pub const PSD_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian at entry ({row}, {col})")]
    NotHermitian { row: usize, col: usize },
    #[error("covariance has eigenvalue {min_eigenvalue:e} below tolerance -{threshold:e}")]
    IndefiniteBeyondTolerance { min_eigenvalue: f64, threshold: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
}

/// CN(mean, covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNormal {
    mean: CVector,
    cov: Hermitian,
}

impl ComplexNormal {
    pub fn new(mean: CVector, cov: Hermitian) -> Result<Self, MomentsError> {
        if mean.len() != cov.dim() {
            return Err(MomentsError::DimMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// CN(0, I).
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: CVector::zeros(dim),
            cov: Hermitian::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &CVector {
        &self.mean
    }

    pub fn cov(&self) -> &Hermitian {
        &self.cov
    }

    /// Pre-factors the covariance for repeated draws.
    pub fn sampler(&self) -> Result<Sampler, MomentsError> {
        Ok(Sampler {
            mean: self.mean.clone(),
            factor: factor_psd(&self.cov)?,
        })
    }
}

/// Square-root factor `G` with `G·Gᴴ` equal to the eigenvalue-clipped
/// covariance. Columns belonging to zero eigenvalues are dropped, so `G` is
/// `dim × rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    g: CMatrix,
}

impl PsdFactor {
    pub fn matrix(&self) -> &CMatrix {
        &self.g
    }

    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    /// `G·Gᴴ`
    pub fn reconstruct(&self) -> CMatrix {
        &self.g * self.g.adjoint()
    }
}

/// Eigen-decomposition based square root of a PSD Hermitian matrix.
pub fn factor_psd(cov: &Hermitian) -> Result<PsdFactor, MomentsError> {
    let dim = cov.dim();
    if cov.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(PsdFactor {
            g: CMatrix::zeros(dim, 0),
        });
    }
    let scale = (cov.trace_re() / dim as f64).max(0.0);
    let threshold = PSD_EPS * scale;
    let eig = SymmetricEigen::new(cov.as_matrix().clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -threshold {
        return Err(MomentsError::IndefiniteBeyondTolerance {
            min_eigenvalue: min,
            threshold,
        });
    }
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    let mut g = CMatrix::zeros(dim, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for r in 0..dim {
            g[(r, col)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    Ok(PsdFactor { g })
}

/// Repeated draws from a fixed CN(m, Σ).
#[derive(Debug, Clone)]
pub struct Sampler {
    mean: CVector,
    factor: PsdFactor,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let mut out = CVector::zeros(self.dim());
        self.sample_into(rng, &mut out);
        out
    }

    /// `out = m + G·w`, `w ~ CN(0, I_rank)`. Allocation free.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut CVector) {
        out.copy_from(&self.mean);
        let g = &self.factor.g;
        let dim = self.dim();
        for c in 0..g.ncols() {
            let w = standard_complex_normal(rng);
            let col = g.column(c);
            for r in 0..dim {
                out[r] += col[r] * w;
            }
        }
    }
}

/// One draw from `dist`.
pub fn sample<R: Rng + ?Sized>(dist: &ComplexNormal, rng: &mut R) -> Result<CVector, MomentsError> {
    Ok(dist.sampler()?.sample(rng))
}

fn check_square(a: &CMatrix, dim: usize) -> Result<(), MomentsError> {
    if a.nrows() != dim || a.ncols() != dim {
        return Err(MomentsError::DimMismatch {
            expected: dim,
            found: if a.nrows() != dim { a.nrows() } else { a.ncols() },
        });
    }
    Ok(())
}

/// `E[xᴴAx] = Tr{AΣ} + mᴴAm`.
pub fn quad_expectation(a: &CMatrix, dist: &ComplexNormal) -> Result<Complex64, MomentsError> {
    check_square(a, dist.dim())?;
    Ok(trace_product(a, &dist.cov) + quad_form(a, &dist.mean))
}

/// `E[‖x‖²] = Tr{Σ} + ‖m‖²`.
pub fn expected_norm_sq(dist: &ComplexNormal) -> f64 {
    dist.cov.trace_re() + dist.mean.norm_squared()
}

/// `E[xxᴴ] = Σ + mmᴴ`.
pub fn outer_moment(dist: &ComplexNormal) -> Hermitian {
    let mut out = dist.cov.clone();
    out.add_outer_assign(1.0, &dist.mean);
    out
}

/// Affine map `x ↦ A·x + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub mat: CMatrix,
    pub offset: CVector,
}

impl AffineMap {
    pub fn new(mat: CMatrix, offset: CVector) -> Self {
        Self { mat, offset }
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(CMatrix::identity(dim, dim))
    }

    pub fn linear(mat: CMatrix) -> Self {
        let n = mat.nrows();
        Self {
            mat,
            offset: CVector::zeros(n),
        }
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.mat * x + &self.offset
    }

    fn check(&self, dim: usize) -> Result<(), MomentsError> {
        check_square(&self.mat, dim)?;
        if self.offset.len() != dim {
            return Err(MomentsError::DimMismatch {
                expected: dim,
                found: self.offset.len(),
            });
        }
        Ok(())
    }
}

/// `E[(Ax+a)ᴴ(Bx+b)(Cx+c)ᴴ(Dx+d)]` for `x ~ CN(m, Σ)`:
///
/// ```text
///   Tr{AᴴBΣCᴴDΣ}
/// + (Cm+c)ᴴ DΣAᴴ (Bm+b)
/// + (Am+a)ᴴ BΣCᴴ (Dm+d)
/// + (Tr{BΣAᴴ} + (Am+a)ᴴ(Bm+b)) · (Tr{DΣCᴴ} + (Cm+c)ᴴ(Dm+d))
/// ```
pub fn quartic_expectation(
    a: &AffineMap,
    b: &AffineMap,
    c: &AffineMap,
    d: &AffineMap,
    dist: &ComplexNormal,
) -> Result<Complex64, MomentsError> {
    let n = dist.dim();
    for map in [a, b, c, d] {
        map.check(n)?;
    }
    let sigma = dist.cov.as_matrix();
    let m = &dist.mean;
    let am = a.apply(m);
    let bm = b.apply(m);
    let cm = c.apply(m);
    let dm = d.apply(m);

    let ah_b_sigma = a.mat.adjoint() * &b.mat * sigma;
    let ch_d_sigma = c.mat.adjoint() * &d.mat * sigma;
    let t1 = trace_product(&ah_b_sigma, &ch_d_sigma);

    let d_sigma_ah = &d.mat * sigma * a.mat.adjoint();
    let t2 = cm.dotc(&(d_sigma_ah * &bm));

    let b_sigma_ch = &b.mat * sigma * c.mat.adjoint();
    let t3 = am.dotc(&(b_sigma_ch * &dm));

    let left = trace_product(&(&b.mat * sigma), &a.mat.adjoint()) + am.dotc(&bm);
    let right = trace_product(&(&d.mat * sigma), &c.mat.adjoint()) + cm.dotc(&dm);

    Ok(t1 + t2 + t3 + left * right)
}

/// `E[‖x‖⁴] = Tr{Σ²} + 2mᴴΣm + (Tr{Σ} + ‖m‖²)²`.
pub fn expected_norm_fourth(dist: &ComplexNormal) -> f64 {
    let tr_sq = trace_product(&dist.cov, &dist.cov).re;
    let mean_quad = dist.cov.quad_form(&dist.mean);
    let second = expected_norm_sq(dist);
    tr_sq + 2.0 * mean_quad + second * second
}

/// A value split into the part that only involves diagonal entries and the
/// part contributed by off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub diag: f64,
    pub offdiag: f64,
}

impl Split {
    pub fn total(&self) -> f64 {
        self.diag + self.offdiag
    }
}

/// Diagonal/off-diagonal decompositions of `Tr{A²}`, `xᴴAx` and `Tr{AB}`
/// for Hermitian `A`, `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitReport {
    pub trace_sq: Split,
    pub quad: Split,
    pub trace_ab: Split,
}

pub fn offdiag_splits(a: &Hermitian, b: &Hermitian, x: &CVector) -> Result<SplitReport, MomentsError> {
    let n = a.dim();
    if b.dim() != n {
        return Err(MomentsError::DimMismatch {
            expected: n,
            found: b.dim(),
        });
    }
    if x.len() != n {
        return Err(MomentsError::DimMismatch {
            expected: n,
            found: x.len(),
        });
    }
    let mut trace_sq = Split { diag: 0.0, offdiag: 0.0 };
    let mut quad = Split { diag: 0.0, offdiag: 0.0 };
    let mut trace_ab = Split { diag: 0.0, offdiag: 0.0 };
    for i in 0..n {
        let aii = a[(i, i)].re;
        trace_sq.diag += aii * aii;
        quad.diag += aii * x[i].norm_sqr();
        trace_ab.diag += aii * b[(i, i)].re;
        let mut q_off = Complex64::new(0.0, 0.0);
        let mut ab_off = Complex64::new(0.0, 0.0);
        for j in 0..i {
            let aij = a[(i, j)];
            trace_sq.offdiag += 2.0 * aij.norm_sqr();
            q_off += aij * x[i].conj() * x[j];
            ab_off += aij.conj() * b[(i, j)];
        }
        quad.offdiag += 2.0 * q_off.re;
        trace_ab.offdiag += 2.0 * ab_off.re;
    }
    Ok(SplitReport {
        trace_sq,
        quad,
        trace_ab,
    })
}

/// `‖G·Gᴴ − Σ‖ / ‖Σ‖`, used by tests and diagnostics.
pub fn factor_residual(cov: &Hermitian, factor: &PsdFactor) -> f64 {
    let norm = frobenius(cov).max(f64::MIN_POSITIVE);
    frobenius(&(factor.reconstruct() - cov.as_matrix())) / norm
}
