//! Instantaneous SE of MRC, closed-form ergodic approximations and the
//! mean-effective-channel reference bound.
//!
//! The combiner of user `k` is its LS or MMSE estimate `ĝ_k`; the channel
//! is split as `g_k = ĝ_k^m + g̃_k^m` with the MMSE error `g̃_k^m ~ CN(0, V_k)`
//! independent of `ĝ_k^m`. Conditioned on the estimates the MRC output
//! power separates into
//!
//! ```text
//! signal = p_lk·|ĝ_kᴴ ĝ_k^m|²
//! I₁     = Σ_{i≠k} p_li·|ĝ_kᴴ ĝ_i^m|²
//! I₂     = ĝ_kᴴ (Σ_i p_li·V_i) ĝ_k
//! I₃     = ĝ_kᴴ (Σ_{j≠l} Σ_i p_ji·(R_lji + m_lji m_ljiᴴ)) ĝ_k
//! I₄     = σ²·‖ĝ_k‖²
//! ```
//!
//! and `SE = γ·log2(1 + signal / (I₁ + I₂ + I₃ + I₄))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{estimator_statistics, EstimationError, EstimatorStatistics};
use crate::linalg::{trace_product, trace_second_moments, CVector, Hermitian};
use crate::moments::offdiag_splits;
use crate::scenario::{LinkStatistics, PowerAllocation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("user {user}: positive signal power over a zero denominator")]
    DegenerateDenominator { user: usize },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Channel estimator used as the MRC combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ls,
    Mmse,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Ls, Estimator::Mmse];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Mmse => "mmse",
        }
    }
}

/// Which expression to use for `E[|(ĝ^ls)ᴴ ĝ^m|²]`.
///
/// `Exact` has `Tr{U_k·S_k}` as its first term. `Published` replaces it by
/// `Tr{R_k²}`, which coincides with `Tr{U_k·S_k}` only when `R_k` and `S_k`
/// commute (single cell, or scaled-identity covariances).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsNumerator {
    #[default]
    Exact,
    Published,
}

/// Signal and interference powers of one user in one coherence block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub gamma: f64,
}

impl SinrTerms {
    pub fn interference(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }

    /// Total MRC output power.
    pub fn total(&self) -> f64 {
        self.signal + self.interference()
    }
}

/// Expected interference terms of the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenominatorTerms {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

impl DenominatorTerms {
    pub fn total(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }
}

/// Everything the SE of the users of cell `l` depends on, with the sums
/// over users and cells precomputed.
#[derive(Debug, Clone)]
pub struct ErgodicSeInputs {
    pub cell: usize,
    /// Per-user estimator statistics of cell `l`.
    pub stats: Vec<EstimatorStatistics>,
    /// Data powers `p_li` of the users of cell `l`.
    pub data_power: Vec<f64>,
    /// `Σ_i p_li·V_i`
    pub v_sum: Hermitian,
    /// `Σ_{j≠l} Σ_i p_ji·(R_lji + m_lji m_ljiᴴ)`
    pub inter_cell: Hermitian,
    pub sigma_n2: f64,
    /// Pre-log factor `γ`; 1 reports pre-log-excluded values.
    pub gamma: f64,
}

impl ErgodicSeInputs {
    /// Builds the statistics of every user of cell `l` from the links into
    /// BS `l` (`cell_links[j][i]`).
    pub fn new(
        cell_links: &[Vec<LinkStatistics>],
        l: usize,
        powers: &PowerAllocation,
        sigma_n2: f64,
        tau_p: usize,
        gamma: f64,
        perfect_csi: bool,
    ) -> Result<Self, SeError> {
        let users = cell_links[l].len();
        let stats = (0..users)
            .map(|k| {
                if perfect_csi {
                    Ok(EstimatorStatistics::perfect(&cell_links[l][k], tau_p, powers.pilot[l][k]))
                } else {
                    estimator_statistics(cell_links, l, k, powers, sigma_n2, tau_p)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_statistics(cell_links, l, powers, stats, sigma_n2, gamma)
    }

    /// Same as [`ErgodicSeInputs::new`] with the estimator statistics given.
    pub fn from_statistics(
        cell_links: &[Vec<LinkStatistics>],
        l: usize,
        powers: &PowerAllocation,
        stats: Vec<EstimatorStatistics>,
        sigma_n2: f64,
        gamma: f64,
    ) -> Result<Self, SeError> {
        let dim = cell_links[l][0].antennas();
        let mut v_sum = Hermitian::zeros(dim);
        for (i, st) in stats.iter().enumerate() {
            if st.m.len() != dim {
                return Err(SeError::DimMismatch {
                    expected: dim,
                    found: st.m.len(),
                });
            }
            v_sum.add_scaled_assign(powers.data[l][i], &st.mmse.v);
        }
        let mut inter_cell = Hermitian::zeros(dim);
        for (j, cell) in cell_links.iter().enumerate() {
            if j == l {
                continue;
            }
            for (i, link) in cell.iter().enumerate() {
                if link.antennas() != dim {
                    return Err(SeError::DimMismatch {
                        expected: dim,
                        found: link.antennas(),
                    });
                }
                let p = powers.data[j][i];
                inter_cell.add_scaled_assign(p, &link.covariance);
                inter_cell.add_outer_assign(p, &link.mean);
            }
        }
        Ok(Self {
            cell: l,
            stats,
            data_power: powers.data[l].clone(),
            v_sum,
            inter_cell,
            sigma_n2,
            gamma,
        })
    }

    pub fn users(&self) -> usize {
        self.stats.len()
    }

    pub fn antennas(&self) -> usize {
        self.v_sum.dim()
    }

    /// Mean and covariance of the combiner `ĝ_k`.
    fn combiner_moments(&self, estimator: Estimator, k: usize) -> (&CVector, &Hermitian) {
        let st = &self.stats[k];
        match estimator {
            Estimator::Ls => (&st.ls.h, &st.ls.s),
            Estimator::Mmse => (&st.m, &st.mmse.u),
        }
    }
}

fn check_len(v: &CVector, dim: usize) -> Result<(), SeError> {
    if v.len() != dim {
        return Err(SeError::DimMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    Ok(())
}

/// Signal and interference powers of user `k` for one realization.
/// `combiner[k]` is `ĝ_k` (LS or MMSE); `est_mmse[i]` is `ĝ_i^m`.
pub fn instantaneous_sinr(
    k: usize,
    combiner: &[CVector],
    est_mmse: &[CVector],
    inputs: &ErgodicSeInputs,
) -> Result<SinrTerms, SeError> {
    let dim = inputs.antennas();
    let users = inputs.users();
    if est_mmse.len() != users {
        return Err(SeError::DimMismatch {
            expected: users,
            found: est_mmse.len(),
        });
    }
    let g = &combiner[k];
    check_len(g, dim)?;
    let mut signal = 0.0;
    let mut i1 = 0.0;
    for (i, gm) in est_mmse.iter().enumerate() {
        check_len(gm, dim)?;
        let v = inputs.data_power[i] * g.dotc(gm).norm_sqr();
        if i == k {
            signal = v;
        } else {
            i1 += v;
        }
    }
    Ok(SinrTerms {
        signal,
        i1,
        i2: inputs.v_sum.quad_form(g).max(0.0),
        i3: inputs.inter_cell.quad_form(g).max(0.0),
        i4: inputs.sigma_n2 * g.norm_squared(),
        gamma: inputs.gamma,
    })
}

fn log_ratio(gamma: f64, num: f64, den: f64, user: usize) -> Result<f64, SeError> {
    if num <= 0.0 {
        return Ok(0.0);
    }
    if den <= 0.0 {
        return Err(SeError::DegenerateDenominator { user });
    }
    Ok(gamma * (num / den).ln_1p() / std::f64::consts::LN_2)
}

/// `γ·log2(1 + signal / (I₁+I₂+I₃+I₄))`, 0 at zero signal.
pub fn instantaneous_se(terms: &SinrTerms) -> Result<f64, SeError> {
    log_ratio(terms.gamma, terms.signal, terms.interference(), 0)
}

/// `E[|(ĝ_k^ls)ᴴ ĝ_k^m|²] = Tr{U_k S_k} + m_kᴴS_k m_k + h_kᴴU_k h_k + |Tr{R_k} + h_kᴴm_k|²`
/// (or with `Tr{R_k²}` first under [`LsNumerator::Published`]).
pub fn ls_signal_moment(stats: &EstimatorStatistics, variant: LsNumerator) -> f64 {
    let first = match variant {
        LsNumerator::Exact => trace_product(&stats.mmse.u, &stats.ls.s).re,
        LsNumerator::Published => trace_product(&stats.r, &stats.r).re,
    };
    first
        + stats.ls.s.quad_form(&stats.m)
        + stats.mmse.u.quad_form(&stats.ls.h)
        + ls_mean_gain(stats).norm_sqr()
}

/// `E[(ĝ_k^ls)ᴴ ĝ_k^m] = Tr{R_k} + h_kᴴm_k`
fn ls_mean_gain(stats: &EstimatorStatistics) -> Complex64 {
    Complex64::new(stats.r.trace_re(), 0.0) + stats.ls.h.dotc(&stats.m)
}

/// `E[‖ĝ_k^m‖⁴] = Tr{U_k²} + 2m_kᴴU_k m_k + (Tr{U_k} + ‖m_k‖²)²`
pub fn mmse_signal_moment(stats: &EstimatorStatistics) -> f64 {
    let u = &stats.mmse.u;
    let second = mmse_mean_gain(stats);
    trace_product(u, u).re + 2.0 * u.quad_form(&stats.m) + second * second
}

/// `E[‖ĝ_k^m‖²] = Tr{U_k} + ‖m_k‖²`
fn mmse_mean_gain(stats: &EstimatorStatistics) -> f64 {
    stats.mmse.u.trace_re() + stats.m.norm_squared()
}

pub fn signal_moment(estimator: Estimator, stats: &EstimatorStatistics, variant: LsNumerator) -> f64 {
    match estimator {
        Estimator::Ls => ls_signal_moment(stats, variant),
        Estimator::Mmse => mmse_signal_moment(stats),
    }
}

/// `|E[ĝ_kᴴ ĝ_k^m]|²`
pub fn mean_gain_sq(estimator: Estimator, stats: &EstimatorStatistics) -> f64 {
    match estimator {
        Estimator::Ls => ls_mean_gain(stats).norm_sqr(),
        Estimator::Mmse => mmse_mean_gain(stats).powi(2),
    }
}

/// Expectations of `I₁…I₄` for user `k`. With `Φ = Cov(ĝ_k) + E[ĝ_k]E[ĝ_k]ᴴ`:
///
/// ```text
/// I₁ = Σ_{i≠k} p_li·Tr{Φ·(U_i + m_i m_iᴴ)}
/// I₂ = Tr{Φ·Σ_i p_li·V_i}
/// I₃ = Tr{Φ·Σ_{j≠l} Σ_i p_ji·(R_lji + m_lji m_ljiᴴ)}
/// I₄ = σ²·Tr{Φ}
/// ```
pub fn ergodic_denominator(estimator: Estimator, inputs: &ErgodicSeInputs, k: usize) -> DenominatorTerms {
    let (mu, cov) = inputs.combiner_moments(estimator, k);
    let zero = CVector::zeros(inputs.antennas());
    let i1 = inputs
        .stats
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(i, st)| inputs.data_power[i] * trace_second_moments(cov, mu, &st.mmse.u, &st.m))
        .sum();
    DenominatorTerms {
        i1,
        i2: trace_second_moments(cov, mu, &inputs.v_sum, &zero),
        i3: trace_second_moments(cov, mu, &inputs.inter_cell, &zero),
        i4: inputs.sigma_n2 * (cov.trace_re() + mu.norm_squared()),
    }
}

/// `γ·log2(1 + p_lk·E[|ĝ_kᴴĝ_k^m|²] / (Ī₁+Ī₂+Ī₃+Ī₄))`
pub fn ergodic_se_closed_form(
    estimator: Estimator,
    inputs: &ErgodicSeInputs,
    k: usize,
    variant: LsNumerator,
) -> Result<f64, SeError> {
    let num = inputs.data_power[k] * signal_moment(estimator, &inputs.stats[k], variant);
    let den = ergodic_denominator(estimator, inputs, k).total();
    log_ratio(inputs.gamma, num, den, k)
}

/// Reference bound: the signal is `p_lk·|E[ĝ_kᴴĝ_k^m]|²` and every other
/// part of the total output power counts as interference.
pub fn baseline_lower_bound(
    estimator: Estimator,
    inputs: &ErgodicSeInputs,
    k: usize,
    variant: LsNumerator,
) -> Result<f64, SeError> {
    let st = &inputs.stats[k];
    let p = inputs.data_power[k];
    let moment = signal_moment(estimator, st, variant);
    let mean_sq = mean_gain_sq(estimator, st);
    let num = p * mean_sq;
    let den = p * (moment - mean_sq).max(0.0) + ergodic_denominator(estimator, inputs, k).total();
    log_ratio(inputs.gamma, num, den, k)
}

/// Correlated and uncorrelated values of one term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermComparison {
    pub correlated: f64,
    pub uncorrelated: f64,
}

impl TermComparison {
    /// `correlated − uncorrelated`
    pub fn gain(&self) -> f64 {
        self.correlated - self.uncorrelated
    }
}

/// Interference term contributed by user `user` of cell `cell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceComparison {
    pub cell: usize,
    pub user: usize,
    pub term: TermComparison,
}

/// Term-by-term comparison of correlated and uncorrelated channels under
/// perfect CSI, where both estimators share the SINR argument
/// `p_lk·E[‖g_k‖⁴] / Σ interference`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    /// `Tr{R_k²}`
    pub trace_sq: TermComparison,
    /// `m_kᴴR_k m_k`
    pub mean_quad: TermComparison,
    /// `Tr{(R_k + m_k m_kᴴ)(R_lji + m_lji m_ljiᴴ)}` for every `(j, i) ≠ (l, k)`.
    pub interference: Vec<InterferenceComparison>,
    /// Power-weighted interference plus noise.
    pub total_interference: TermComparison,
    /// Argument of `log2(1 + ·)`.
    pub sinr: TermComparison,
}

/// Replaces every covariance by its diagonal.
pub fn decorrelate(cell_links: &[Vec<LinkStatistics>]) -> Vec<Vec<LinkStatistics>> {
    cell_links
        .iter()
        .map(|cell| {
            cell.iter()
                .map(|link| LinkStatistics {
                    scalars: link.scalars.clone(),
                    mean: link.mean.clone(),
                    covariance: link.covariance.diagonal_part(),
                })
                .collect()
        })
        .collect()
}

/// Perfect-CSI comparison for user `k` of cell `l`. `uncorrelated` must hold
/// the same links as `correlated` with off-diagonal covariance entries
/// zeroed (see [`decorrelate`]).
pub fn correlation_impact_report(
    correlated: &[Vec<LinkStatistics>],
    uncorrelated: &[Vec<LinkStatistics>],
    l: usize,
    k: usize,
    powers: &PowerAllocation,
    sigma_n2: f64,
) -> Result<ImpactReport, SeError> {
    if correlated.len() != uncorrelated.len() {
        return Err(SeError::DimMismatch {
            expected: correlated.len(),
            found: uncorrelated.len(),
        });
    }
    let own = &correlated[l][k];
    let dim = own.antennas();
    for (cc, uc) in correlated.iter().zip(uncorrelated) {
        if cc.len() != uc.len() {
            return Err(SeError::DimMismatch {
                expected: cc.len(),
                found: uc.len(),
            });
        }
        for link in cc.iter().chain(uc) {
            check_len(&link.mean, dim)?;
        }
    }
    let own_uc = &uncorrelated[l][k];
    let splits = offdiag_splits(&own.covariance, &own.covariance, &own.mean).map_err(EstimationError::from)?;
    let trace_sq = TermComparison {
        correlated: splits.trace_sq.total(),
        uncorrelated: splits.trace_sq.diag,
    };
    let mean_quad = TermComparison {
        correlated: splits.quad.total(),
        uncorrelated: splits.quad.diag,
    };

    let mut interference = Vec::new();
    let mut total = TermComparison {
        correlated: sigma_n2 * (own.covariance.trace_re() + own.mean.norm_squared()),
        uncorrelated: sigma_n2 * (own_uc.covariance.trace_re() + own_uc.mean.norm_squared()),
    };
    for (j, (cc, uc)) in correlated.iter().zip(uncorrelated).enumerate() {
        for (i, (c, u)) in cc.iter().zip(uc).enumerate() {
            if (j, i) == (l, k) {
                continue;
            }
            let term = TermComparison {
                correlated: trace_second_moments(&own.covariance, &own.mean, &c.covariance, &c.mean),
                uncorrelated: trace_second_moments(&own_uc.covariance, &own_uc.mean, &u.covariance, &u.mean),
            };
            let p = powers.data[j][i];
            total.correlated += p * term.correlated;
            total.uncorrelated += p * term.uncorrelated;
            interference.push(InterferenceComparison { cell: j, user: i, term });
        }
    }

    let numerator = |r: &Hermitian, tr_sq: f64, quad: f64, m: &CVector| {
        let second = r.trace_re() + m.norm_squared();
        powers.data[l][k] * (tr_sq + 2.0 * quad + second * second)
    };
    let ratio = |n: f64, d: f64| if d > 0.0 { n / d } else { f64::INFINITY };
    let sinr = TermComparison {
        correlated: ratio(
            numerator(&own.covariance, trace_sq.correlated, mean_quad.correlated, &own.mean),
            total.correlated,
        ),
        uncorrelated: ratio(
            numerator(&own_uc.covariance, trace_sq.uncorrelated, mean_quad.uncorrelated, &own_uc.mean),
            total.uncorrelated,
        ),
    };
    Ok(ImpactReport {
        trace_sq,
        mean_quad,
        interference,
        total_interference: total,
        sinr,
    })
}
