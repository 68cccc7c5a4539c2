//! Named scenarios for the published figure set.
//!
//! A preset expands to one or more complete configurations. Figures that
//! compare correlated and uncorrelated channels expand to one configuration
//! per variant, with ids `<name>-correlated` and `<name>-uncorrelated`.

use mimo_se::scenario::{Correlation, Fading};

use crate::config::{ConfigError, ConfigFile, Grid};

pub const PRESET_NAMES: [&str; 9] = [
    "fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c", "fig6-uray", "fig7", "fig8",
];

fn base(id: &str) -> ConfigFile {
    let mut c = ConfigFile::default();
    c.scenario.id = id.to_string();
    c.run.m_values = (1..=10).map(|i| 10 * i).collect();
    c.run.k_values = vec![c.scenario.users];
    c
}

fn with_fading(mut c: ConfigFile, fading: Fading, correlation: Correlation) -> ConfigFile {
    c.scenario.fading = fading;
    c.scenario.correlation = correlation;
    c
}

fn both_correlations(name: &str, fading: Fading, cluster_angle_override: bool) -> Vec<ConfigFile> {
    [(Correlation::Correlated, "correlated"), (Correlation::Uncorrelated, "uncorrelated")]
        .into_iter()
        .map(|(corr, tag)| {
            let mut c = with_fading(base(&format!("{name}-{tag}")), fading, corr);
            c.scenario.cluster_angle_override = cluster_angle_override;
            c
        })
        .collect()
}

/// Expands a preset name into its configurations.
pub fn preset(name: &str) -> Result<Vec<ConfigFile>, ConfigError> {
    let configs = match name {
        "fig4a" => vec![base(name)],
        "fig4b" => {
            let mut c = base(name);
            c.scenario.cells = 1;
            vec![c]
        }
        "fig4c" => vec![with_fading(base(name), Fading::Rayleigh, Correlation::Correlated)],
        "fig5a" => both_correlations(name, Fading::Rician, false),
        "fig5b" => both_correlations(name, Fading::Rayleigh, false),
        "fig5c" => both_correlations(name, Fading::Rician, true),
        "fig6-uray" => vec![with_fading(base(name), Fading::Rayleigh, Correlation::Uncorrelated)],
        "fig7" => {
            let mut c = base(name);
            c.scenario.grid = Grid::Stochastic;
            vec![c]
        }
        "fig8" => {
            let mut c = base(name);
            c.scenario.grid = Grid::Stochastic;
            c.run.m_values = vec![100];
            c.run.k_values = (1..=c.scenario.users).collect();
            vec![c]
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(configs)
}
