//! Network geometry, large-scale fading, power control and pilot books.
//!
//! A *drop* is one realization of everything in this module: BS and user
//! positions, LOS states, shadowing, arrival angles and scattering-cluster
//! angles. The vector quantities (LOS mean vectors and NLOS covariances)
//! are generated from the drop's scalars for whatever antenna count is
//! being evaluated, so an antenna sweep reuses one drop across all `M`.

mod fading;
mod layout;
mod resources;

pub use fading::{
    correlated_covariance, draw_link_scalars, los_mean_vector, los_probability, path_loss, rician_factor,
    split_beta, uncorrelated_covariance, DropScalars, LinkScalars, LinkStatistics,
};
pub use layout::{build_square_grid, build_stochastic_grid, NetworkLayout, Point};
pub use resources::{assign_powers, dft_pilots, PilotBook, PowerAllocation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("square grid needs a perfect-square cell count, got {0}")]
    InvalidCellCount(usize),
    #[error("stochastic grid could not place {users} users per cell within {draws} draws")]
    Timeout { users: usize, draws: usize },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("zero large-scale gain for user {user} in cell {cell}")]
    ZeroBeta { cell: usize, user: usize },
    #[error("{users} users need at least as many pilot symbols, tau_p = {tau_p}")]
    TooManyUsers { users: usize, tau_p: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `P[W] = 10^((P[dBm] − 30)/10)`
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    Rician,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    Correlated,
    Uncorrelated,
}

/// Cell layout family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// BSs at the centres of a √L×√L grid of square cells.
    Square { cell_side: f64 },
    /// BSs uniform in a square area, users served by the nearest BS.
    Stochastic { area_side: f64 },
}

/// Radio parameters. Powers are stored in dBm here and converted to watts
/// on use.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    /// `τ_u + τ_p`
    pub coherence_symbols: usize,
    pub tau_p: usize,
    /// Angular standard deviation of each scattering cluster, degrees.
    pub sigma_theta_deg: f64,
    pub clusters: usize,
    /// Cluster angles are uniform in `θ ± cluster_half_width_deg`.
    pub cluster_half_width_deg: f64,
    pub shadowing_los_std_db: f64,
    pub shadowing_nlos_std_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            noise_dbm: -94.0,
            p_max_dbm: 10.0,
            coherence_symbols: 200,
            tau_p: 10,
            sigma_theta_deg: 10.0,
            clusters: 10,
            cluster_half_width_deg: 40.0,
            shadowing_los_std_db: 4.0,
            shadowing_nlos_std_db: 10.0,
        }
    }
}

impl RadioParams {
    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn p_max_watts(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn tau_u(&self) -> usize {
        self.coherence_symbols.saturating_sub(self.tau_p)
    }

    /// `γ = τ_u / (τ_u + τ_p)`
    pub fn prelog(&self) -> f64 {
        self.tau_u() as f64 / self.coherence_symbols as f64
    }

    pub fn sigma_theta_rad(&self) -> f64 {
        self.sigma_theta_deg.to_radians()
    }
}

/// Everything needed to generate one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub grid: GridKind,
    /// `L`
    pub cells: usize,
    /// `K`
    pub users: usize,
    pub fading: Fading,
    pub correlation: Correlation,
    /// Put every scattering cluster on the LOS arrival angle (`θⁿ = θ`).
    pub cluster_angle_override: bool,
    /// Replace the estimates by the true channels (diagnostic mode).
    pub perfect_csi: bool,
    pub radio: RadioParams,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            grid: GridKind::Square { cell_side: 500.0 },
            cells: 16,
            users: 10,
            fading: Fading::Rician,
            correlation: Correlation::Correlated,
            cluster_angle_override: false,
            perfect_csi: false,
            radio: RadioParams::default(),
        }
    }
}

impl ScenarioParams {
    pub fn is_single_cell(&self) -> bool {
        self.cells == 1
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.cells == 0 || self.users == 0 {
            return Err(ScenarioError::InvalidParameter("cells and users must be positive".into()));
        }
        if let GridKind::Square { .. } = self.grid {
            let side = (self.cells as f64).sqrt().round() as usize;
            if side * side != self.cells {
                return Err(ScenarioError::InvalidCellCount(self.cells));
            }
        }
        if self.users > self.radio.tau_p {
            return Err(ScenarioError::TooManyUsers {
                users: self.users,
                tau_p: self.radio.tau_p,
            });
        }
        if self.radio.tau_p == 0 || self.radio.tau_p >= self.radio.coherence_symbols {
            return Err(ScenarioError::InvalidParameter(format!(
                "tau_p = {} must be in [1, {})",
                self.radio.tau_p, self.radio.coherence_symbols
            )));
        }
        if self.radio.clusters == 0 {
            return Err(ScenarioError::InvalidParameter("at least one scattering cluster".into()));
        }
        Ok(())
    }

    /// Builds the layout for this scenario.
    pub fn build_layout<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<NetworkLayout, ScenarioError> {
        match self.grid {
            GridKind::Square { cell_side } => build_square_grid(self.cells, cell_side, self.users, rng),
            GridKind::Stochastic { area_side } => build_stochastic_grid(self.cells, area_side, self.users, rng),
        }
    }
}
