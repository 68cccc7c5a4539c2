//! TOML run configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected. The resolved configuration is written next to the outputs
//! and parses back to the same value.
//!
//! ```toml
//! [scenario]
//! id = "my-run"
//! grid = "square"            # or "stochastic"
//! cells = 16
//! users = 10
//! cell_side = 500.0          # square grid (m)
//! area_side = 1000.0         # stochastic grid (m)
//! fading = "rician"          # or "rayleigh"
//! correlation = "correlated" # or "uncorrelated"
//! cluster_angle_override = false
//! perfect_csi = false
//!
//! [radio]
//! noise_dbm = -94.0
//! p_max_dbm = 10.0
//! tau_u = 190
//! tau_p = 10
//! sigma_theta_deg = 10.0
//! clusters = 10
//! cluster_half_width_deg = 40.0
//! shadowing_los_std_db = 4.0
//! shadowing_nlos_std_db = 10.0
//!
//! [run]
//! m_values = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
//! k_values = [10]
//! n_drops = 10
//! n_realizations = 100
//! seed = 1
//! methods = ["mc", "closed", "bound"]
//! estimators = ["ls", "mmse"]
//! ls_numerator = "exact"     # or "published"
//! include_prelog = true
//!
//! [output]
//! directory = "results"
//! formats = ["csv", "json"]
//! ```

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

use mimo_se::montecarlo::{Method, RunConfig};
use mimo_se::scenario::{Correlation, Fading, GridKind, RadioParams, ScenarioParams};
use mimo_se::spectral_efficiency::{Estimator, LsNumerator};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Square,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: String,
    pub grid: Grid,
    pub cells: usize,
    pub users: usize,
    pub cell_side: f64,
    pub area_side: f64,
    pub fading: Fading,
    pub correlation: Correlation,
    pub cluster_angle_override: bool,
    pub perfect_csi: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            id: "default".into(),
            grid: Grid::Square,
            cells: 16,
            users: 10,
            cell_side: 500.0,
            area_side: 1000.0,
            fading: Fading::Rician,
            correlation: Correlation::Correlated,
            cluster_angle_override: false,
            perfect_csi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    pub tau_u: usize,
    pub tau_p: usize,
    pub sigma_theta_deg: f64,
    pub clusters: usize,
    pub cluster_half_width_deg: f64,
    pub shadowing_los_std_db: f64,
    pub shadowing_nlos_std_db: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioParams::default();
        Self {
            noise_dbm: r.noise_dbm,
            p_max_dbm: r.p_max_dbm,
            tau_u: r.tau_u(),
            tau_p: r.tau_p,
            sigma_theta_deg: r.sigma_theta_deg,
            clusters: r.clusters,
            cluster_half_width_deg: r.cluster_half_width_deg,
            shadowing_los_std_db: r.shadowing_los_std_db,
            shadowing_nlos_std_db: r.shadowing_nlos_std_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub n_drops: usize,
    pub n_realizations: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub estimators: Vec<Estimator>,
    pub ls_numerator: LsNumerator,
    pub include_prelog: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        let r = RunConfig::default();
        Self {
            m_values: r.m_values,
            k_values: r.k_values,
            n_drops: r.n_drops,
            n_realizations: r.n_realizations,
            seed: r.master_seed,
            methods: r.methods,
            estimators: r.estimators,
            ls_numerator: r.ls_numerator,
            include_prelog: r.include_prelog,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub radio: RadioSection,
    pub run: RunSection,
    pub output: OutputSection,
}

/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

impl ConfigFile {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown field") {
                ConfigError::UnknownKey(msg)
            } else {
                ConfigError::Parse(msg)
            }
        })
    }

    /// The resolved configuration as TOML, with every key written out.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        let s = &self.scenario;
        let r = &self.radio;
        ScenarioParams {
            grid: match s.grid {
                Grid::Square => GridKind::Square { cell_side: s.cell_side },
                Grid::Stochastic => GridKind::Stochastic { area_side: s.area_side },
            },
            cells: s.cells,
            users: s.users,
            fading: s.fading,
            correlation: s.correlation,
            cluster_angle_override: s.cluster_angle_override,
            perfect_csi: s.perfect_csi,
            radio: RadioParams {
                noise_dbm: r.noise_dbm,
                p_max_dbm: r.p_max_dbm,
                coherence_symbols: r.tau_u + r.tau_p,
                tau_p: r.tau_p,
                sigma_theta_deg: r.sigma_theta_deg,
                clusters: r.clusters,
                cluster_half_width_deg: r.cluster_half_width_deg,
                shadowing_los_std_db: r.shadowing_los_std_db,
                shadowing_nlos_std_db: r.shadowing_nlos_std_db,
            },
        }
    }

    /// Checks ranges and converts to the simulator's run configuration.
    pub fn to_run_config(&self) -> Result<RunConfig, ConfigError> {
        let range = |s: String| Err(ConfigError::OutOfRange(s));
        if self.run.seed > MAX_SEED {
            return range(format!("seed {} exceeds {MAX_SEED}", self.run.seed));
        }
        if self.radio.tau_u == 0 {
            return range("tau_u must be at least 1".into());
        }
        let positive = [
            ("cell_side", self.scenario.cell_side),
            ("area_side", self.scenario.area_side),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return range(format!("{name} = {v} must be positive"));
            }
        }
        let nonneg = [
            ("sigma_theta_deg", self.radio.sigma_theta_deg),
            ("cluster_half_width_deg", self.radio.cluster_half_width_deg),
            ("shadowing_los_std_db", self.radio.shadowing_los_std_db),
            ("shadowing_nlos_std_db", self.radio.shadowing_nlos_std_db),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return range(format!("{name} = {v} must be non-negative"));
            }
        }
        if !self.radio.noise_dbm.is_finite() || !self.radio.p_max_dbm.is_finite() {
            return range("powers must be finite".into());
        }
        if self.output.formats.is_empty() {
            return range("at least one output format".into());
        }
        let config = RunConfig {
            scenario_id: self.scenario.id.clone(),
            scenario: self.scenario_params(),
            m_values: self.run.m_values.clone(),
            k_values: self.run.k_values.clone(),
            n_drops: self.run.n_drops,
            n_realizations: self.run.n_realizations,
            master_seed: self.run.seed,
            methods: self.run.methods.clone(),
            estimators: self.run.estimators.clone(),
            ls_numerator: self.run.ls_numerator,
            include_prelog: self.run.include_prelog,
        };
        config.validate().map_err(|e| ConfigError::OutOfRange(e.to_string()))?;
        Ok(config)
    }
}

/// Reads, resolves and checks a configuration file.
pub fn parse_config(path: &Path) -> Result<(ConfigFile, RunConfig), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let file = ConfigFile::parse_str(&text)?;
    let run = file.to_run_config()?;
    Ok((file, run))
}
