//! Pilot phase, LS/MMSE channel estimates and their statistics.
//!
//! Everything is seen from the BS of one cell `l`. User `k` of cell `l` has
//! channel `g_k ~ CN(m_k, R_k)`; user `k` of every other cell `j` reuses the
//! same pilot and contaminates the estimate through `g_ljk`.
//!
//! With `y_k = Ψ·φ_kᴴ` the despread pilot of user `k`:
//!
//! - LS: `ĝ^ls = y_k / (τ_p·√q_lk) ~ CN(h_k, S_k)`
//! - MMSE: `ĝ^m = τ_p·√q_lk·R_k·Ω_k⁻¹·(y_k − τ_p·Σ_j √q_jk·m_ljk) + m_k ~ CN(m_k, U_k)`
//! - and `ĝ^m = F_k·ĝ^ls + f_k` with `F_k = R_k·S_k⁻¹`, `f_k = m_k − F_k·h_k`.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{CMatrix, CVector, Hermitian};
use crate::moments::{MomentsError, Sampler};
use crate::rng::standard_complex_normal;
use crate::scenario::{LinkStatistics, PilotBook, PowerAllocation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("pilot power of user {user} in cell {cell} is not positive")]
    ZeroPilotPower { cell: usize, user: usize },
    #[error("LS covariance S of user {user} is singular")]
    SingularS { user: usize },
    #[error("pilot covariance Omega of user {user} is singular")]
    SingularOmega { user: usize },
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

/// One channel realization into BS `l`: `g[j][i]` is the channel of user `i`
/// of cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub g: Vec<Vec<CVector>>,
}

/// Pre-factored channel distributions of every link into BS `l`.
#[derive(Debug, Clone)]
pub struct ChannelSamplers {
    samplers: Vec<Vec<Sampler>>,
}

impl ChannelSamplers {
    pub fn new(cell_links: &[Vec<LinkStatistics>]) -> Result<Self, EstimationError> {
        let samplers = cell_links
            .iter()
            .map(|cell| {
                cell.iter()
                    .map(|link| {
                        let dist = crate::moments::ComplexNormal::new(link.mean.clone(), link.covariance.clone())?;
                        Ok(dist.sampler()?)
                    })
                    .collect::<Result<Vec<_>, EstimationError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { samplers })
    }

    /// Draws every link, cell by cell and user by user.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        ChannelDraw {
            g: self
                .samplers
                .iter()
                .map(|cell| cell.iter().map(|s| s.sample(rng)).collect())
                .collect(),
        }
    }
}

/// Despread pilot `Ψ·φ_kᴴ` of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub despread: CVector,
    pub tau_p: usize,
    /// `q_lk` (W)
    pub pilot_power: f64,
}

fn check_dims(channels: &ChannelDraw, powers: &PowerAllocation) -> Result<usize, EstimationError> {
    if channels.g.len() != powers.cells() {
        return Err(EstimationError::DimMismatch {
            expected: powers.cells(),
            found: channels.g.len(),
        });
    }
    let m = channels.g.first().and_then(|c| c.first()).map_or(0, CVector::len);
    for cell in &channels.g {
        for g in cell {
            if g.len() != m {
                return Err(EstimationError::DimMismatch {
                    expected: m,
                    found: g.len(),
                });
            }
        }
    }
    Ok(m)
}

/// Received pilot block `Ψ = Σ_j Σ_i √q_ji·g_lji·φ_i + W` (`M × τ_p`).
pub fn received_pilot_signal(
    channels: &ChannelDraw,
    pilots: &PilotBook,
    powers: &PowerAllocation,
    noise: &CMatrix,
) -> Result<CMatrix, EstimationError> {
    let m = check_dims(channels, powers)?;
    if noise.nrows() != m || noise.ncols() != pilots.tau_p {
        return Err(EstimationError::DimMismatch {
            expected: m * pilots.tau_p,
            found: noise.nrows() * noise.ncols(),
        });
    }
    let mut psi = noise.clone();
    for (j, cell) in channels.g.iter().enumerate() {
        for (i, g) in cell.iter().enumerate() {
            let amp = Complex64::new(powers.pilot[j][i].sqrt(), 0.0);
            psi += (g * amp) * pilots.sequences[i].transpose();
        }
    }
    Ok(psi)
}

/// `Ψ·φ_kᴴ` for every pilot of the book, as seen by BS `l`.
pub fn despread(psi: &CMatrix, pilots: &PilotBook, powers: &PowerAllocation, l: usize) -> Vec<PilotObservation> {
    pilots
        .sequences
        .iter()
        .enumerate()
        .map(|(k, phi)| PilotObservation {
            despread: psi * phi.conjugate(),
            tau_p: pilots.tau_p,
            pilot_power: powers.pilot[l][k],
        })
        .collect()
}

/// Despread-domain synthesis that never forms `Ψ`:
/// `y_k = τ_p·Σ_j √q_jk·g_ljk + w_k` with `w_k = W·φ_kᴴ` supplied.
pub fn despread_direct(
    channels: &ChannelDraw,
    powers: &PowerAllocation,
    l: usize,
    tau_p: usize,
    noise_proj: &[CVector],
) -> Result<Vec<PilotObservation>, EstimationError> {
    check_dims(channels, powers)?;
    let users = noise_proj.len();
    let tau = tau_p as f64;
    Ok((0..users)
        .map(|k| {
            let mut y = noise_proj[k].clone();
            for (j, cell) in channels.g.iter().enumerate() {
                y.axpy(Complex64::new(tau * powers.pilot[j][k].sqrt(), 0.0), &cell[k], Complex64::new(1.0, 0.0));
            }
            PilotObservation {
                despread: y,
                tau_p,
                pilot_power: powers.pilot[l][k],
            }
        })
        .collect())
}

/// Pilot phase of cell `l` for one realization. The projected noise
/// `W·φ_kᴴ` is drawn directly as CN(0, σ²·τ_p·I), independent across `k`
/// because the pilots are orthogonal with `‖φ_k‖² = τ_p`.
pub fn simulate_pilot_phase<R: Rng + ?Sized>(
    channels: &ChannelDraw,
    pilots: &PilotBook,
    powers: &PowerAllocation,
    l: usize,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<PilotObservation>, EstimationError> {
    let m = check_dims(channels, powers)?;
    let std = (sigma_n2 * pilots.tau_p as f64).sqrt();
    let noise: Vec<CVector> = (0..pilots.sequences.len())
        .map(|_| CVector::from_fn(m, |_, _| standard_complex_normal(rng) * std))
        .collect();
    despread_direct(channels, powers, l, pilots.tau_p, &noise)
}

/// `ĝ^ls = y / (τ_p·√q)`
pub fn ls_estimate(obs: &PilotObservation) -> Result<CVector, EstimationError> {
    if obs.pilot_power <= 0.0 {
        return Err(EstimationError::ZeroPilotPower { cell: 0, user: 0 });
    }
    Ok(&obs.despread / Complex64::new(obs.tau_p as f64 * obs.pilot_power.sqrt(), 0.0))
}

/// LS estimate statistics: `ĝ^ls ~ CN(h, S)`, error `g − ĝ^ls ~ CN(h̄, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsStatistics {
    pub h: CVector,
    pub s: Hermitian,
    pub h_bar: CVector,
    pub t: Hermitian,
}

/// MMSE estimate statistics and the LS→MMSE affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseStatistics {
    /// Covariance of `ĝ^m`.
    pub u: Hermitian,
    /// Covariance of the error `g − ĝ^m`.
    pub v: Hermitian,
    /// `F = R·S⁻¹`
    pub f_mat: CMatrix,
    /// `f = m − F·h`
    pub f_vec: CVector,
    /// `Ω = τ_p²·q·S`
    pub omega: Hermitian,
}

/// Both estimators' statistics for one user, together with the user's own
/// channel statistics `(m_k, R_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStatistics {
    pub m: CVector,
    pub r: Hermitian,
    pub ls: LsStatistics,
    pub mmse: MmseStatistics,
}

impl EstimatorStatistics {
    /// `ĝ^m = F·ĝ^ls + f`
    pub fn mmse_from_ls(&self, ls: &CVector) -> CVector {
        &self.mmse.f_mat * ls + &self.mmse.f_vec
    }

    /// Statistics when the estimates equal the true channel.
    pub fn perfect(link: &LinkStatistics, tau_p: usize, pilot_power: f64) -> Self {
        let dim = link.antennas();
        let r = link.covariance.clone();
        let tau = tau_p as f64;
        Self {
            m: link.mean.clone(),
            ls: LsStatistics {
                h: link.mean.clone(),
                s: r.clone(),
                h_bar: CVector::zeros(dim),
                t: Hermitian::zeros(dim),
            },
            mmse: MmseStatistics {
                u: r.clone(),
                v: Hermitian::zeros(dim),
                f_mat: CMatrix::identity(dim, dim),
                f_vec: CVector::zeros(dim),
                omega: r.scale(tau * tau * pilot_power),
            },
            r,
        }
    }
}

/// Relative pivot floor below which a Hermitian matrix counts as singular.
const PIVOT_FLOOR: f64 = 1e-12;

/// Cholesky factor, or `None` when a squared pivot falls below
/// `PIVOT_FLOOR` times the mean diagonal.
fn well_conditioned_cholesky(mat: CMatrix) -> Option<Cholesky<Complex64, nalgebra::Dyn>> {
    let n = mat.nrows();
    if n == 0 {
        return None;
    }
    let scale = (0..n).map(|i| mat[(i, i)].re).sum::<f64>() / n as f64;
    if scale <= 0.0 || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(mat)?;
    let l = chol.l_dirty();
    let min_pivot = (0..n).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    (min_pivot * min_pivot > PIVOT_FLOOR * scale).then_some(chol)
}

fn pilot_power(powers: &PowerAllocation, l: usize, k: usize) -> Result<f64, EstimationError> {
    let q = powers.pilot[l][k];
    if q <= 0.0 || !q.is_finite() {
        return Err(EstimationError::ZeroPilotPower { cell: l, user: k });
    }
    Ok(q)
}

/// `h_k`, `S_k`, `h̄_k`, `T_k` of user `k` of cell `l`.
///
/// ```text
/// h = m_k + Σ_{j≠l} √(q_jk/q_lk)·m_ljk
/// S = R_k + Σ_{j≠l} (q_jk/q_lk)·R_ljk + σ²/(τ_p·q_lk)·I
/// h̄ = −Σ_{j≠l} √(q_jk/q_lk)·m_ljk
/// T = S − R_k
/// ```
pub fn ls_statistics(
    cell_links: &[Vec<LinkStatistics>],
    l: usize,
    k: usize,
    powers: &PowerAllocation,
    sigma_n2: f64,
    tau_p: usize,
) -> Result<LsStatistics, EstimationError> {
    let q = pilot_power(powers, l, k)?;
    let own = &cell_links[l][k];
    let dim = own.antennas();
    let mut h_bar = CVector::zeros(dim);
    let mut t = Hermitian::scaled_identity(dim, sigma_n2 / (tau_p as f64 * q));
    for (j, cell) in cell_links.iter().enumerate() {
        if j == l {
            continue;
        }
        let link = &cell[k];
        if link.antennas() != dim {
            return Err(EstimationError::DimMismatch {
                expected: dim,
                found: link.antennas(),
            });
        }
        let ratio = powers.pilot[j][k] / q;
        h_bar.axpy(Complex64::new(-ratio.sqrt(), 0.0), &link.mean, Complex64::new(1.0, 0.0));
        t.add_scaled_assign(ratio, &link.covariance);
    }
    let h = &own.mean - &h_bar;
    let s = own.covariance.add(&t);
    Ok(LsStatistics { h, s, h_bar, t })
}

/// `U_k`, `V_k`, `F_k`, `f_k`, `Ω_k` of user `k` of cell `l`, from the LS
/// statistics. Uses one Cholesky factorization of `S_k`.
pub fn mmse_statistics(
    cell_links: &[Vec<LinkStatistics>],
    l: usize,
    k: usize,
    powers: &PowerAllocation,
    sigma_n2: f64,
    tau_p: usize,
) -> Result<MmseStatistics, EstimationError> {
    let ls = ls_statistics(cell_links, l, k, powers, sigma_n2, tau_p)?;
    mmse_from_ls_statistics(&cell_links[l][k], &ls, powers.pilot[l][k], tau_p, k)
}

fn mmse_from_ls_statistics(
    own: &LinkStatistics,
    ls: &LsStatistics,
    q: f64,
    tau_p: usize,
    k: usize,
) -> Result<MmseStatistics, EstimationError> {
    let r = &own.covariance;
    let chol = well_conditioned_cholesky(ls.s.as_matrix().clone()).ok_or(EstimationError::SingularS { user: k })?;
    // S⁻¹R, so F = R·S⁻¹ = (S⁻¹R)ᴴ.
    let s_inv_r = chol.solve(r.as_matrix());
    let f_mat = s_inv_r.adjoint();
    let u = Hermitian::symmetrize(r.as_matrix() * &s_inv_r);
    let v = r.sub(&u);
    let f_vec = &own.mean - &f_mat * &ls.h;
    let tau = tau_p as f64;
    let omega = ls.s.scale(tau * tau * q);
    Ok(MmseStatistics {
        u,
        v,
        f_mat,
        f_vec,
        omega,
    })
}

/// Statistics of user `k` of cell `l` for both estimators.
pub fn estimator_statistics(
    cell_links: &[Vec<LinkStatistics>],
    l: usize,
    k: usize,
    powers: &PowerAllocation,
    sigma_n2: f64,
    tau_p: usize,
) -> Result<EstimatorStatistics, EstimationError> {
    let own = &cell_links[l][k];
    let ls = ls_statistics(cell_links, l, k, powers, sigma_n2, tau_p)?;
    let mmse = mmse_from_ls_statistics(own, &ls, powers.pilot[l][k], tau_p, k)?;
    Ok(EstimatorStatistics {
        m: own.mean.clone(),
        r: own.covariance.clone(),
        ls,
        mmse,
    })
}

/// MMSE estimate straight from the despread pilot:
///
/// `ĝ^m = τ_p·√q_lk·R_k·Ω_k⁻¹·(y − τ_p·Σ_j √q_jk·m_ljk) + m_k`,
/// `Ω_k = τ_p²·Σ_j q_jk·R_ljk + σ²·τ_p·I`.
///
/// The centering sum runs over every cell including `l`.
pub fn mmse_estimate(
    obs: &PilotObservation,
    cell_links: &[Vec<LinkStatistics>],
    l: usize,
    k: usize,
    powers: &PowerAllocation,
    sigma_n2: f64,
) -> Result<CVector, EstimationError> {
    let q = pilot_power(powers, l, k)?;
    let own = &cell_links[l][k];
    let dim = own.antennas();
    if obs.despread.len() != dim {
        return Err(EstimationError::DimMismatch {
            expected: dim,
            found: obs.despread.len(),
        });
    }
    let tau = obs.tau_p as f64;
    let mut omega = Hermitian::scaled_identity(dim, sigma_n2 * tau);
    let mut centered = obs.despread.clone();
    for (j, cell) in cell_links.iter().enumerate() {
        let qj = powers.pilot[j][k];
        omega.add_scaled_assign(tau * tau * qj, &cell[k].covariance);
        centered.axpy(Complex64::new(-tau * qj.sqrt(), 0.0), &cell[k].mean, Complex64::new(1.0, 0.0));
    }
    let chol = well_conditioned_cholesky(omega.into_matrix()).ok_or(EstimationError::SingularOmega { user: k })?;
    let whitened = chol.solve(&centered);
    let scale = Complex64::new(tau * q.sqrt(), 0.0);
    Ok(own.covariance.as_matrix() * whitened * scale + &own.mean)
}
