//! Large-scale fading, LOS mean vectors and NLOS spatial covariances.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use super::{db_to_linear, Correlation, Fading, NetworkLayout, ScenarioError, ScenarioParams};
use crate::linalg::{CMatrix, CVector, Hermitian};
use crate::rng::{substream, tag};

/// Distance beyond which no LOS path exists (m).
pub const LOS_CUTOFF: f64 = 300.0;

/// Total large-scale gain in linear scale.
///
/// LOS: `−30.18 − 26·log10(r) + z` dB; NLOS: `−34.53 − 38·log10(r) + z` dB.
pub fn path_loss(r: f64, los: bool, shadowing_db: f64) -> Result<f64, ScenarioError> {
    if r <= 0.0 || r.is_nan() {
        return Err(ScenarioError::NonPositiveDistance(r));
    }
    let db = if los {
        -30.18 - 26.0 * r.log10()
    } else {
        -34.53 - 38.0 * r.log10()
    };
    Ok(db_to_linear(db + shadowing_db))
}

/// Rician factor `κ = 13 − 0.03·r` dB, returned in linear scale.
pub fn rician_factor(r: f64) -> f64 {
    db_to_linear(13.0 - 0.03 * r)
}

/// `max(0, 1 − r/300)`
pub fn los_probability(r: f64) -> f64 {
    (1.0 - r / LOS_CUTOFF).max(0.0)
}

/// `(β^LOS, β^NLOS) = (κ/(1+κ)·β, 1/(1+κ)·β)`; `κ = ∞` puts everything on
/// the LOS path.
pub fn split_beta(beta: f64, kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        return (beta, 0.0);
    }
    (kappa / (1.0 + kappa) * beta, beta / (1.0 + kappa))
}

/// ULA steering vector with half-wavelength spacing scaled by `√β^LOS`:
/// `[m]_s = √β^LOS · exp(jπ(s−1)·sin θ)`.
pub fn los_mean_vector(beta_los: f64, theta: f64, antennas: usize) -> CVector {
    let amp = beta_los.sqrt();
    let phase = PI * theta.sin();
    CVector::from_fn(antennas, |s, _| Complex64::from_polar(amp, phase * s as f64))
}

/// Scattering-cluster covariance
///
/// `[R]_{s,t} = (β/N)·Σ_n exp(jπ(s−t)·sin θⁿ)·exp(−(σ²/2)·(π(s−t)·cos θⁿ)²)`
///
/// The matrix is Hermitian Toeplitz, so only the first column is evaluated.
pub fn correlated_covariance(beta_nlos: f64, cluster_angles: &[f64], sigma_theta: f64, antennas: usize) -> Hermitian {
    let n = cluster_angles.len().max(1) as f64;
    let half_var = 0.5 * sigma_theta * sigma_theta;
    let column: Vec<Complex64> = (0..antennas)
        .map(|d| {
            let d = d as f64;
            let sum: Complex64 = cluster_angles
                .iter()
                .map(|&th| {
                    let spread = PI * d * th.cos();
                    Complex64::from_polar((-half_var * spread * spread).exp(), PI * d * th.sin())
                })
                .sum();
            sum * (beta_nlos / n)
        })
        .collect();
    let mut m = CMatrix::zeros(antennas, antennas);
    for s in 0..antennas {
        for t in 0..antennas {
            m[(s, t)] = if s >= t { column[s - t] } else { column[t - s].conj() };
        }
    }
    for s in 0..antennas {
        m[(s, s)] = Complex64::new(beta_nlos, 0.0);
    }
    Hermitian::symmetrize(m)
}

/// `β^NLOS·I`
pub fn uncorrelated_covariance(beta_nlos: f64, antennas: usize) -> Hermitian {
    Hermitian::scaled_identity(antennas, beta_nlos)
}

/// Antenna-independent state of one link (user `k` of cell `j` seen by
/// BS `l`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScalars {
    pub distance: f64,
    pub shadowing_db: f64,
    pub has_los: bool,
    pub beta_total: f64,
    pub beta_los: f64,
    pub beta_nlos: f64,
    /// Effective Rician factor `β^LOS/β^NLOS` (0 without LOS).
    pub kappa: f64,
    /// LOS angle of arrival (rad).
    pub theta: f64,
    /// Scattering-cluster angles of arrival (rad).
    pub cluster_angles: Vec<f64>,
}

/// One link with its vector statistics at a given antenna count:
/// `g ~ CN(mean, covariance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStatistics {
    pub scalars: LinkScalars,
    pub mean: CVector,
    pub covariance: Hermitian,
}

impl LinkStatistics {
    pub fn antennas(&self) -> usize {
        self.mean.len()
    }
}

/// All link scalars of a drop, indexed `[l][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropScalars {
    cells: usize,
    users: usize,
    links: Vec<LinkScalars>,
}

impl DropScalars {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn link(&self, l: usize, j: usize, k: usize) -> &LinkScalars {
        &self.links[(l * self.cells + j) * self.users + k]
    }

    /// Own-cell gains `β_llk`, shape `L × K`.
    pub fn own_cell_betas(&self) -> Vec<Vec<f64>> {
        (0..self.cells)
            .map(|l| (0..self.users).map(|k| self.link(l, l, k).beta_total).collect())
            .collect()
    }

    /// Vector statistics of one link for `antennas` BS antennas.
    pub fn link_statistics(&self, params: &ScenarioParams, l: usize, j: usize, k: usize, antennas: usize) -> LinkStatistics {
        let s = self.link(l, j, k);
        let mean = if s.has_los {
            los_mean_vector(s.beta_los, s.theta, antennas)
        } else {
            CVector::zeros(antennas)
        };
        let covariance = match params.correlation {
            Correlation::Correlated => {
                correlated_covariance(s.beta_nlos, &s.cluster_angles, params.radio.sigma_theta_rad(), antennas)
            }
            Correlation::Uncorrelated => uncorrelated_covariance(s.beta_nlos, antennas),
        };
        LinkStatistics {
            scalars: s.clone(),
            mean,
            covariance,
        }
    }

    /// Every link into BS `l`, indexed `[j][k]`.
    pub fn cell_links(&self, params: &ScenarioParams, l: usize, antennas: usize) -> Vec<Vec<LinkStatistics>> {
        (0..self.cells)
            .map(|j| {
                (0..self.users)
                    .map(|k| self.link_statistics(params, l, j, k, antennas))
                    .collect()
            })
            .collect()
    }
}

fn draw_link<R: Rng + ?Sized>(distance: f64, params: &ScenarioParams, rng: &mut R) -> Result<LinkScalars, ScenarioError> {
    let radio = &params.radio;
    // Every random number is drawn regardless of mode so that Rician and
    // Rayleigh (or override on/off) runs of one seed share their drops.
    let los_u: f64 = rng.random();
    let shadow_unit: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    let theta = 2.0 * PI * rng.random::<f64>();
    let half = radio.cluster_half_width_deg.to_radians();
    let mut cluster_angles: Vec<f64> = (0..radio.clusters)
        .map(|_| theta + half * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    if params.cluster_angle_override {
        cluster_angles.iter_mut().for_each(|a| *a = theta);
    }

    let los = los_u < los_probability(distance);
    let std = if los {
        radio.shadowing_los_std_db
    } else {
        radio.shadowing_nlos_std_db
    };
    let shadowing_db = std * shadow_unit;
    let beta = path_loss(distance, los, shadowing_db)?;
    let (mut beta_los, beta_nlos) = if los {
        split_beta(beta, rician_factor(distance))
    } else {
        (0.0, beta)
    };
    // Rayleigh keeps the NLOS gain of the Rician drop and drops the LOS
    // component.
    let has_los = los && params.fading == Fading::Rician;
    if !has_los {
        beta_los = 0.0;
    }
    let kappa = if has_los { beta_los / beta_nlos } else { 0.0 };
    Ok(LinkScalars {
        distance,
        shadowing_db,
        has_los,
        beta_total: beta_los + beta_nlos,
        beta_los,
        beta_nlos,
        kappa,
        theta,
        cluster_angles,
    })
}

/// Draws shadowing, LOS state and angles for every `(l, j, k)` link. Link
/// `(l, j, k)` uses its own substream of `seed`.
pub fn draw_link_scalars(layout: &NetworkLayout, params: &ScenarioParams, seed: u64) -> Result<DropScalars, ScenarioError> {
    let cells = layout.cells();
    let users = layout.users_per_cell();
    let mut links = Vec::with_capacity(cells * cells * users);
    for l in 0..cells {
        for j in 0..cells {
            for k in 0..users {
                let mut rng = substream(seed, &[tag::LINKS, l as u64, j as u64, k as u64]);
                links.push(draw_link(layout.distance(l, j, k), params, &mut rng)?);
            }
        }
    }
    Ok(DropScalars { cells, users, links })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::rng::stream;
    use crate::scenario::{build_square_grid, linear_to_db};

    #[test]
    fn path_loss_values() {
        assert!((linear_to_db(path_loss(100.0, true, 0.0).unwrap()) + 82.18).abs() < 1e-9);
        assert!((linear_to_db(path_loss(100.0, false, 0.0).unwrap()) + 110.53).abs() < 1e-9);
        assert!((linear_to_db(path_loss(1.0, true, 0.0).unwrap()) + 30.18).abs() < 1e-9);
        assert!((linear_to_db(path_loss(100.0, true, 3.5).unwrap()) + 78.68).abs() < 1e-9);
        assert_eq!(path_loss(0.0, true, 0.0), Err(ScenarioError::NonPositiveDistance(0.0)));
    }

    #[test]
    fn rician_factor_values() {
        assert!((rician_factor(100.0) - 10.0).abs() < 1e-12);
        assert!((linear_to_db(rician_factor(0.0)) - 13.0).abs() < 1e-12);
        assert!((linear_to_db(rician_factor(300.0)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(300.0), 0.0);
        assert_eq!(los_probability(450.0), 0.0);
        assert_eq!(los_probability(0.0), 1.0);
        assert!((los_probability(150.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_split() {
        let (l, n) = split_beta(2.0, 3.0);
        assert!((l - 1.5).abs() < 1e-15 && (n - 0.5).abs() < 1e-15);
        assert_eq!(split_beta(2.0, f64::INFINITY), (2.0, 0.0));
        let (_, n) = split_beta(1.0, 1e12);
        assert!(n < 1e-11);
    }

    #[test]
    fn steering_vector() {
        let m = los_mean_vector(4.0, 1.234, 6);
        assert!((m[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((m.norm_squared() - 6.0 * 4.0).abs() < 1e-12);
        let flat = los_mean_vector(1.0, 0.0, 3);
        assert!(flat.iter().all(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let alt = los_mean_vector(1.0, PI / 2.0, 2);
        assert!((alt[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn correlated_covariance_properties() {
        let r = correlated_covariance(1.0, &[0.0], 0.0, 2);
        assert!((r.as_matrix() - CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0))).norm() < 1e-15);

        let mut rng = stream(3);
        let angles: Vec<f64> = (0..10).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let beta = 3e-9;
        let r = correlated_covariance(beta, &angles, 10f64.to_radians(), 8);
        for s in 0..8 {
            assert_eq!(r[(s, s)], Complex64::new(beta, 0.0));
            for t in 0..8 {
                assert!((r[(s, t)] - r[(t, s)].conj()).norm() == 0.0);
            }
        }
        assert!(r.min_eigenvalue() >= -1e-9 * beta);

        let u = uncorrelated_covariance(beta, 8);
        assert_eq!(u, r.diagonal_part());
        assert_eq!(uncorrelated_covariance(1.0, 3), Hermitian::identity(3));
        assert_eq!(max_abs(uncorrelated_covariance(0.0, 3).as_matrix()), 0.0);
    }

    #[test]
    fn correlated_covariance_matches_direct_double_sum() {
        let angles = [0.3, 1.1, 2.9];
        let sigma = 0.17;
        let r = correlated_covariance(2.0, &angles, sigma, 5);
        for s in 0..5 {
            for t in 0..5 {
                let d = s as f64 - t as f64;
                let direct: Complex64 = angles
                    .iter()
                    .map(|&th| {
                        Complex64::from_polar(1.0, PI * d * th.sin())
                            * (-(sigma * sigma / 2.0) * (PI * d * th.cos()).powi(2)).exp()
                    })
                    .sum::<Complex64>()
                    * (2.0 / 3.0);
                assert!((r[(s, t)] - direct).norm() < 1e-14);
            }
        }
    }

    fn drop_for(params: &ScenarioParams, seed: u64) -> (NetworkLayout, DropScalars) {
        let layout = params.build_layout(&mut stream(seed)).unwrap();
        let scalars = draw_link_scalars(&layout, params, seed).unwrap();
        (layout, scalars)
    }

    #[test]
    fn link_invariants_hold() {
        let params = ScenarioParams {
            cells: 4,
            users: 5,
            ..ScenarioParams::default()
        };
        let (layout, scalars) = drop_for(&params, 17);
        let mut saw_los = false;
        let mut saw_nlos = false;
        for l in 0..4 {
            for j in 0..4 {
                for k in 0..5 {
                    let s = scalars.link(l, j, k);
                    assert_eq!(s.distance, layout.distance(l, j, k));
                    assert!((s.beta_los + s.beta_nlos - s.beta_total).abs() <= 1e-12 * s.beta_total);
                    assert_eq!(s.cluster_angles.len(), 10);
                    if s.has_los {
                        saw_los = true;
                        assert!(s.distance < LOS_CUTOFF);
                        assert!((s.beta_los / s.beta_nlos - rician_factor(s.distance)).abs() <= 1e-12 * s.kappa);
                    } else {
                        saw_nlos = true;
                        assert_eq!(s.beta_los, 0.0);
                    }
                    let stats = scalars.link_statistics(&params, l, j, k, 16);
                    assert!((stats.mean.norm_squared() - 16.0 * s.beta_los).abs() <= 1e-9 * (16.0 * s.beta_total));
                    if !s.has_los {
                        assert_eq!(stats.mean, CVector::zeros(16));
                    }
                }
            }
        }
        assert!(saw_los && saw_nlos);
    }

    #[test]
    fn rayleigh_mode_keeps_nlos_gains() {
        let rician = ScenarioParams {
            cells: 4,
            users: 5,
            ..ScenarioParams::default()
        };
        let rayleigh = ScenarioParams {
            fading: Fading::Rayleigh,
            ..rician.clone()
        };
        let (_, a) = drop_for(&rician, 5);
        let (_, b) = drop_for(&rayleigh, 5);
        for l in 0..4 {
            for j in 0..4 {
                for k in 0..5 {
                    let (x, y) = (a.link(l, j, k), b.link(l, j, k));
                    assert!(!y.has_los);
                    assert_eq!(y.beta_los, 0.0);
                    assert_eq!(x.beta_nlos, y.beta_nlos);
                    assert_eq!(y.beta_total, y.beta_nlos);
                    assert_eq!(x.theta, y.theta);
                }
            }
        }
    }

    #[test]
    fn override_puts_clusters_on_los_angle() {
        let params = ScenarioParams {
            cells: 1,
            users: 3,
            cluster_angle_override: true,
            ..ScenarioParams::default()
        };
        let (_, s) = drop_for(&params, 2);
        let link = s.link(0, 0, 1);
        assert!(link.cluster_angles.iter().all(|&a| a == link.theta));
    }

    #[test]
    fn drops_are_deterministic() {
        let params = ScenarioParams {
            cells: 4,
            users: 3,
            ..ScenarioParams::default()
        };
        assert_eq!(drop_for(&params, 8), drop_for(&params, 8));
        assert_ne!(drop_for(&params, 8).1, drop_for(&params, 9).1);
    }

    #[test]
    fn square_layout_and_scalars_for_single_cell() {
        let params = ScenarioParams {
            cells: 1,
            users: 10,
            ..ScenarioParams::default()
        };
        let layout = build_square_grid(1, 500.0, 10, &mut stream(1)).unwrap();
        let s = draw_link_scalars(&layout, &params, 1).unwrap();
        assert_eq!(s.own_cell_betas().len(), 1);
        assert_eq!(s.cell_links(&params, 0, 4)[0].len(), 10);
    }
}
