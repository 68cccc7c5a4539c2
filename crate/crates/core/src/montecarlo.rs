//! Drops, coherence-block realizations and sweeps over `M` and `K`.
//!
//! Seed paths (see [`crate::rng`]):
//!
//! - layout of drop `d` with `K` users: `[DROP, K, d, LAYOUT]`
//! - link scalars of that drop: `[DROP, K, d, LINKS]`, then `[LINKS, l, j, k]`
//! - realization `r` in cell `l` at `M` antennas:
//!   `[DROP, K, d, ANTENNAS, M, CELL, l]`, then `[REALIZATION, r]`
//!
//! The layout and link scalars of a drop do not depend on `M`, so an antenna
//! sweep evaluates every `M` on the same drops. Each work item owns its
//! stream and results are collected in a fixed order, so the output does
//! not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::estimation::{ls_estimate, simulate_pilot_phase, ChannelSamplers, EstimationError};
use crate::linalg::CVector;
use crate::rng::{derive_seed, substream, tag};
use crate::scenario::{
    assign_powers, dft_pilots, draw_link_scalars, GridKind, LinkStatistics, PowerAllocation, ScenarioError,
    ScenarioParams,
};
use crate::spectral_efficiency::{
    baseline_lower_bound, ergodic_se_closed_form, instantaneous_se, instantaneous_sinr, ErgodicSeInputs,
    Estimator, LsNumerator, SeError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Se(#[from] SeError),
    #[error("drop {drop} (M = {antennas}, K = {users}), cell {cell}, realization {realization}: {source}")]
    Realization {
        drop: usize,
        antennas: usize,
        users: usize,
        cell: usize,
        realization: usize,
        source: SeError,
    },
}

/// How an SE value was obtained. Variants are ordered by their labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Closed-form ergodic approximation.
    #[serde(rename = "closed")]
    Closed,
    /// Monte Carlo average of the instantaneous SE.
    #[serde(rename = "mc")]
    Mc,
    /// Mean-effective-channel reference bound.
    #[serde(rename = "reference-bound", alias = "bound")]
    Bound,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Closed, Method::Mc, Method::Bound];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Closed => "closed",
            Method::Mc => "mc",
            Method::Bound => "reference-bound",
        }
    }
}

/// Everything a sweep depends on besides the thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario_id: String,
    /// `users` is overridden by each entry of `k_values` in a user sweep.
    pub scenario: ScenarioParams,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub n_drops: usize,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub estimators: Vec<Estimator>,
    pub ls_numerator: LsNumerator,
    /// Multiply every SE by `γ = τ_u/(τ_u + τ_p)`.
    pub include_prelog: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario_id: "default".into(),
            scenario: ScenarioParams::default(),
            m_values: (1..=10).map(|i| 10 * i).collect(),
            k_values: vec![10],
            n_drops: 10,
            n_realizations: 100,
            master_seed: 1,
            methods: Method::ALL.to_vec(),
            estimators: Estimator::ALL.to_vec(),
            ls_numerator: LsNumerator::Exact,
            include_prelog: true,
        }
    }
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let bad = |s: &str| Err(MonteCarloError::InvalidConfig(s.into()));
        if self.n_realizations == 0 {
            return bad("n_realizations must be at least 1");
        }
        if self.n_drops == 0 {
            return bad("n_drops must be at least 1");
        }
        if self.m_values.is_empty() || !strictly_increasing(&self.m_values) || self.m_values[0] == 0 {
            return bad("m_values must be non-empty, positive and strictly increasing");
        }
        if self.k_values.is_empty() || !strictly_increasing(&self.k_values) || self.k_values[0] == 0 {
            return bad("k_values must be non-empty, positive and strictly increasing");
        }
        if self.methods.is_empty() || self.estimators.is_empty() {
            return bad("at least one method and one estimator");
        }
        self.scenario.validate()?;
        for &k in &self.k_values {
            if k > self.scenario.radio.tau_p {
                return Err(ScenarioError::TooManyUsers {
                    users: k,
                    tau_p: self.scenario.radio.tau_p,
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        if self.include_prelog {
            self.scenario.radio.prelog()
        } else {
            1.0
        }
    }

    fn wants(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }
}

/// Results of one estimator for one user in one drop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOutcome {
    pub mc_mean: Option<f64>,
    pub mc_ci95: Option<f64>,
    pub closed: Option<f64>,
    pub bound: Option<f64>,
}

impl EstimatorOutcome {
    pub fn get(&self, method: Method) -> Option<f64> {
        match method {
            Method::Closed => self.closed,
            Method::Mc => self.mc_mean,
            Method::Bound => self.bound,
        }
    }
}

/// Per-user results of one cell in one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: usize,
    /// `users[k][e]` for estimator index `e` (see [`estimator_index`]).
    pub users: Vec<[EstimatorOutcome; 2]>,
    /// Instantaneous SE per realization, `samples[e][k][r]`.
    pub samples: [Vec<Vec<f64>>; 2],
}

/// Index of an estimator in the per-estimator arrays.
pub fn estimator_index(e: Estimator) -> usize {
    match e {
        Estimator::Ls => 0,
        Estimator::Mmse => 1,
    }
}

/// One drop evaluated at one `(M, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub drop: usize,
    pub antennas: usize,
    pub users: usize,
    pub cells: Vec<CellOutcome>,
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if x.len() <= LEAF {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and 95% normal-approximation half-width.
pub fn mean_ci95(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Realization loop and closed forms for cell `l`, given the links into BS
/// `l`. Realization `r` draws from `substream(seed, [REALIZATION, r])`.
pub fn simulate_cell(
    cell_links: &[Vec<LinkStatistics>],
    l: usize,
    powers: &PowerAllocation,
    config: &RunConfig,
    seed: u64,
) -> Result<CellOutcome, MonteCarloError> {
    let params = &config.scenario;
    let radio = &params.radio;
    let users = cell_links[l].len();
    let sigma = radio.noise_watts();
    let inputs = ErgodicSeInputs::new(cell_links, l, powers, sigma, radio.tau_p, config.gamma(), params.perfect_csi)?;
    let mut outcome = CellOutcome {
        cell: l,
        users: vec![[EstimatorOutcome::default(); 2]; users],
        samples: [Vec::new(), Vec::new()],
    };

    for &e in &config.estimators {
        let ei = estimator_index(e);
        for k in 0..users {
            let slot = &mut outcome.users[k][ei];
            if config.wants(Method::Closed) {
                slot.closed = Some(ergodic_se_closed_form(e, &inputs, k, config.ls_numerator)?);
            }
            if config.wants(Method::Bound) {
                slot.bound = Some(baseline_lower_bound(e, &inputs, k, config.ls_numerator)?);
            }
        }
    }

    if config.wants(Method::Mc) {
        let samplers = ChannelSamplers::new(cell_links)?;
        let pilots = dft_pilots(users, radio.tau_p)?;
        let per_realization: Vec<[Vec<f64>; 2]> = (0..config.n_realizations)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, &[tag::REALIZATION, r as u64]);
                let draw = samplers.draw(&mut rng);
                let (ls, mm): (Vec<CVector>, Vec<CVector>) = if params.perfect_csi {
                    (draw.g[l].clone(), draw.g[l].clone())
                } else {
                    let obs = simulate_pilot_phase(&draw, &pilots, powers, l, sigma, &mut rng)?;
                    let ls = obs.iter().map(ls_estimate).collect::<Result<Vec<_>, _>>()?;
                    let mm = ls.iter().zip(&inputs.stats).map(|(g, st)| st.mmse_from_ls(g)).collect();
                    (ls, mm)
                };
                let mut out = [Vec::new(), Vec::new()];
                for &e in &config.estimators {
                    let comb = match e {
                        Estimator::Ls => &ls,
                        Estimator::Mmse => &mm,
                    };
                    out[estimator_index(e)] = (0..users)
                        .map(|k| {
                            instantaneous_sinr(k, comb, &mm, &inputs).and_then(|t| instantaneous_se(&t)).map_err(
                                |source| MonteCarloError::Realization {
                                    drop: 0,
                                    antennas: inputs.antennas(),
                                    users,
                                    cell: l,
                                    realization: r,
                                    source,
                                },
                            )
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, MonteCarloError>>()?;

        for &e in &config.estimators {
            let ei = estimator_index(e);
            let samples: Vec<Vec<f64>> = (0..users)
                .map(|k| per_realization.iter().map(|s| s[ei][k]).collect())
                .collect();
            for (k, s) in samples.iter().enumerate() {
                let (mean, ci) = mean_ci95(s);
                outcome.users[k][ei].mc_mean = Some(mean);
                outcome.users[k][ei].mc_ci95 = Some(ci);
            }
            outcome.samples[ei] = samples;
        }
    }
    Ok(outcome)
}

/// Cells whose users are analysed: the central cell of a square grid, every
/// cell of a stochastic grid.
pub fn analysed_cells(params: &ScenarioParams, layout: &crate::scenario::NetworkLayout) -> Vec<usize> {
    match params.grid {
        GridKind::Square { .. } => vec![layout.central_cell()],
        GridKind::Stochastic { .. } => (0..layout.cells()).collect(),
    }
}

/// Builds drop `drop` for `users` users per cell and evaluates it at
/// `antennas` antennas.
pub fn run_drop(config: &RunConfig, antennas: usize, users: usize, drop: usize) -> Result<DropOutcome, MonteCarloError> {
    let params = ScenarioParams {
        users,
        ..config.scenario.clone()
    };
    params.validate()?;
    let base = [tag::DROP, users as u64, drop as u64];
    let mut layout_rng = substream(config.master_seed, &[base[0], base[1], base[2], tag::LAYOUT]);
    let layout = params.build_layout(&mut layout_rng)?;
    let scalars = draw_link_scalars(&layout, &params, derive_seed(config.master_seed, &[base[0], base[1], base[2], tag::LINKS]))?;
    let powers = assign_powers(&scalars.own_cell_betas(), params.radio.p_max_watts())?;
    let run = RunConfig {
        scenario: params.clone(),
        ..config.clone()
    };
    let cells = analysed_cells(&params, &layout)
        .into_par_iter()
        .map(|l| {
            let links = scalars.cell_links(&params, l, antennas);
            let seed = derive_seed(
                config.master_seed,
                &[base[0], base[1], base[2], tag::ANTENNAS, antennas as u64, tag::CELL, l as u64],
            );
            simulate_cell(&links, l, &powers, &run, seed).map_err(|e| match e {
                MonteCarloError::Realization {
                    antennas,
                    users,
                    cell,
                    realization,
                    source,
                    ..
                } => MonteCarloError::Realization {
                    drop,
                    antennas,
                    users,
                    cell,
                    realization,
                    source,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DropOutcome {
        drop,
        antennas,
        users,
        cells,
    })
}

/// Row label: a user index, the sum over the users of a cell, or the
/// system total. Ordered as users, `sum`, `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UserLabel {
    User(usize),
    Sum,
    Total,
}

impl fmt::Display for UserLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserLabel::User(k) => write!(f, "{k}"),
            UserLabel::Sum => f.write_str("sum"),
            UserLabel::Total => f.write_str("total"),
        }
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario_id: String,
    pub antennas: usize,
    pub users: usize,
    pub cells: usize,
    pub user: UserLabel,
    pub estimator: Estimator,
    pub method: Method,
    pub se: f64,
    /// Present only for Monte Carlo rows.
    pub ci95: Option<f64>,
    pub n_samples: usize,
}

impl SweepRow {
    fn sort_key(&self) -> (usize, usize, UserLabel, Estimator, Method) {
        (self.antennas, self.users, self.user, self.estimator, self.method)
    }
}

/// Rows sorted by `(M, K, user, estimator, method)` plus the per-drop
/// outcomes they were aggregated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub drops: Vec<DropOutcome>,
}

impl SweepResult {
    pub fn row(&self, m: usize, k: usize, user: UserLabel, e: Estimator, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| (r.antennas, r.users, r.user, r.estimator, r.method) == (m, k, user, e, method))
    }
}

/// Sweep over `config.m_values` at `K = config.scenario.users`.
pub fn sweep_antennas(config: &RunConfig) -> Result<SweepResult, MonteCarloError> {
    let k = config.scenario.users;
    run_grid(config, &config.m_values, &[k])
}

/// Sweep over `config.k_values` at every `M` of `config.m_values`.
pub fn sweep_users(config: &RunConfig) -> Result<SweepResult, MonteCarloError> {
    run_grid(config, &config.m_values, &config.k_values)
}

/// Evaluates every `(M, K)` of the grid on `config.n_drops` drops.
pub fn run_grid(config: &RunConfig, m_values: &[usize], k_values: &[usize]) -> Result<SweepResult, MonteCarloError> {
    let check = RunConfig {
        m_values: m_values.to_vec(),
        k_values: k_values.to_vec(),
        ..config.clone()
    };
    check.validate()?;
    let items: Vec<(usize, usize, usize)> = k_values
        .iter()
        .flat_map(|&k| m_values.iter().flat_map(move |&m| (0..config.n_drops).map(move |d| (m, k, d))))
        .collect();
    let drops = items
        .into_par_iter()
        .map(|(m, k, d)| run_drop(config, m, k, d))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for &k in k_values {
        for &m in m_values {
            let group: Vec<&DropOutcome> = drops.iter().filter(|o| o.antennas == m && o.users == k).collect();
            aggregate(config, m, k, &group, &mut rows);
        }
    }
    rows.sort_by_key(|r| r.sort_key());
    Ok(SweepResult { rows, drops })
}

fn aggregate(config: &RunConfig, m: usize, k: usize, group: &[&DropOutcome], rows: &mut Vec<SweepRow>) {
    let cells_total = config.scenario.cells;
    let outcomes: Vec<&CellOutcome> = group.iter().flat_map(|d| d.cells.iter()).collect();
    let row = |user, estimator, method, se, ci95, n_samples| SweepRow {
        scenario_id: config.scenario_id.clone(),
        antennas: m,
        users: k,
        cells: cells_total,
        user,
        estimator,
        method,
        se,
        ci95,
        n_samples,
    };
    for &e in &config.estimators {
        let ei = estimator_index(e);
        for &method in &config.methods {
            let mut per_user = Vec::with_capacity(k);
            let mut per_user_ci = Vec::with_capacity(k);
            let n_samples;
            if method == Method::Mc {
                let mut sums: Vec<f64> = Vec::new();
                for user in 0..k {
                    let pooled: Vec<f64> = outcomes.iter().flat_map(|c| c.samples[ei][user].iter().copied()).collect();
                    let (mean, ci) = mean_ci95(&pooled);
                    per_user.push(mean);
                    per_user_ci.push(ci);
                }
                for c in &outcomes {
                    for r in 0..config.n_realizations {
                        let per: Vec<f64> = (0..k).map(|user| c.samples[ei][user][r]).collect();
                        sums.push(pairwise_sum(&per));
                    }
                }
                n_samples = sums.len();
                let (_, sum_ci) = mean_ci95(&sums);
                let sum = pairwise_sum(&per_user);
                for (user, (&se, &ci)) in per_user.iter().zip(&per_user_ci).enumerate() {
                    rows.push(row(UserLabel::User(user), e, method, se, Some(ci), n_samples));
                }
                rows.push(row(UserLabel::Sum, e, method, sum, Some(sum_ci), n_samples));
                rows.push(row(
                    UserLabel::Total,
                    e,
                    method,
                    sum * cells_total as f64,
                    Some(sum_ci * cells_total as f64),
                    n_samples,
                ));
            } else {
                for user in 0..k {
                    let vals: Vec<f64> = outcomes
                        .iter()
                        .map(|c| c.users[user][ei].get(method).unwrap_or(f64::NAN))
                        .collect();
                    per_user.push(pairwise_sum(&vals) / vals.len() as f64);
                }
                n_samples = outcomes.len();
                let sum = pairwise_sum(&per_user);
                for (user, &se) in per_user.iter().enumerate() {
                    rows.push(row(UserLabel::User(user), e, method, se, None, n_samples));
                }
                rows.push(row(UserLabel::Sum, e, method, sum, None, n_samples));
                rows.push(row(UserLabel::Total, e, method, sum * cells_total as f64, None, n_samples));
            }
        }
    }
}

/// Places where a closed-form `sum` series decreases as `M` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub users: usize,
    pub estimator: Estimator,
    pub from_antennas: usize,
    pub to_antennas: usize,
    pub drop_in_se: f64,
}

pub fn monotonicity_violations(result: &SweepResult) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    let mut series: Vec<&SweepRow> = result
        .rows
        .iter()
        .filter(|r| r.method == Method::Closed && r.user == UserLabel::Sum)
        .collect();
    series.sort_by_key(|r| (r.users, r.estimator, r.antennas));
    for w in series.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.users == b.users && a.estimator == b.estimator && b.se < a.se {
            out.push(MonotonicityViolation {
                users: a.users,
                estimator: a.estimator,
                from_antennas: a.antennas,
                to_antennas: b.antennas,
                drop_in_se: a.se - b.se,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Hermitian;
    use crate::scenario::{Correlation, Fading, LinkScalars};

    fn small_config() -> RunConfig {
        RunConfig {
            scenario_id: "test".into(),
            scenario: ScenarioParams {
                cells: 4,
                users: 3,
                radio: crate::scenario::RadioParams {
                    tau_p: 3,
                    ..Default::default()
                },
                ..Default::default()
            },
            m_values: vec![4, 8],
            k_values: vec![3],
            n_drops: 2,
            n_realizations: 5,
            master_seed: 42,
            ..RunConfig::default()
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let x: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&x), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        let (m, ci) = mean_ci95(&[3.0]);
        assert_eq!((m, ci), (3.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        assert!(c.validate().is_ok());
        c.n_realizations = 0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.m_values = vec![8, 4];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.k_values = vec![2, 4];
        assert!(matches!(
            c.validate(),
            Err(MonteCarloError::Scenario(ScenarioError::TooManyUsers { users: 4, tau_p: 3 }))
        ));
    }

    #[test]
    fn single_realization_mean_is_the_sample() {
        let mut c = small_config();
        c.n_realizations = 1;
        let d = run_drop(&c, 4, 3, 0).unwrap();
        for cell in &d.cells {
            for e in 0..2 {
                for k in 0..3 {
                    assert_eq!(cell.users[k][e].mc_mean, Some(cell.samples[e][k][0]));
                }
            }
        }
    }

    #[test]
    fn noiseless_perfect_csi_estimators_agree() {
        let mut c = small_config();
        c.scenario.cells = 1;
        c.scenario.perfect_csi = true;
        c.scenario.radio.noise_dbm = -400.0;
        let d = run_drop(&c, 8, 3, 0).unwrap();
        for u in &d.cells[0].users {
            let (a, b) = (u[0].mc_mean.unwrap(), u[1].mc_mean.unwrap());
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn sweeps_are_reproducible_and_nested() {
        let c = small_config();
        let a = sweep_antennas(&c).unwrap();
        let b = sweep_antennas(&c).unwrap();
        assert_eq!(a, b);
        let only8 = sweep_antennas(&RunConfig {
            m_values: vec![8],
            ..c.clone()
        })
        .unwrap();
        let rows8: Vec<_> = a.rows.iter().filter(|r| r.antennas == 8).cloned().collect();
        assert_eq!(rows8, only8.rows);
        let drop = run_drop(&c, 8, 3, 1).unwrap();
        assert_eq!(only8.drops[1], drop);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = small_config();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sweep_antennas(&c).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn rows_sorted_and_sums_consistent() {
        let r = sweep_antennas(&small_config()).unwrap();
        let keys: Vec<_> = r.rows.iter().map(SweepRow::sort_key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for m in [4, 8] {
            for e in Estimator::ALL {
                for method in Method::ALL {
                    let users: f64 = (0..3).map(|k| r.row(m, 3, UserLabel::User(k), e, method).unwrap().se).sum();
                    let sum = r.row(m, 3, UserLabel::Sum, e, method).unwrap();
                    assert!((users - sum.se).abs() <= 1e-9 * sum.se.abs());
                    assert_eq!(sum.ci95.is_some(), method == Method::Mc);
                    let total = r.row(m, 3, UserLabel::Total, e, method).unwrap();
                    assert_eq!(total.se, sum.se * 4.0);
                }
            }
        }
    }

    #[test]
    fn stochastic_grid_analyses_every_cell() {
        let mut c = small_config();
        c.scenario.grid = GridKind::Stochastic { area_side: 1000.0 };
        c.methods = vec![Method::Closed];
        let d = run_drop(&c, 4, 3, 0).unwrap();
        assert_eq!(d.cells.len(), 4);
        assert!(d.cells.iter().all(|cell| cell.samples[0].is_empty()));
    }

    /// `E[log2(1 + ρX)]`, `X ~ Exp(1)`: `e^{1/ρ}·E₁(1/ρ)/ln 2`.
    fn exponential_capacity(rho: f64) -> f64 {
        let x = 1.0 / rho;
        // E₁ by its power series, adequate for the small x used here.
        let mut e1 = -0.577_215_664_901_532_9 - x.ln();
        let mut term = 1.0;
        for n in 1..60 {
            term *= -x / n as f64;
            e1 -= term / n as f64;
        }
        x.exp() * e1 / std::f64::consts::LN_2
    }

    #[test]
    fn ci_covers_known_mean() {
        let beta = 1e-10;
        let links = vec![vec![LinkStatistics {
            scalars: LinkScalars {
                distance: 100.0,
                shadowing_db: 0.0,
                has_los: false,
                beta_total: beta,
                beta_los: 0.0,
                beta_nlos: beta,
                kappa: 0.0,
                theta: 0.0,
                cluster_angles: vec![0.0],
            },
            mean: CVector::zeros(1),
            covariance: Hermitian::scaled_identity(1, beta),
        }]];
        let mut config = small_config();
        config.scenario.cells = 1;
        config.scenario.users = 1;
        config.scenario.perfect_csi = true;
        config.scenario.fading = Fading::Rayleigh;
        config.scenario.correlation = Correlation::Uncorrelated;
        config.include_prelog = false;
        config.n_realizations = 100;
        let powers = PowerAllocation::uniform(1, 1, 0.01);
        let rho = 0.01 * beta / config.scenario.radio.noise_watts();
        let truth = exponential_capacity(rho);
        let covered = (0..100)
            .filter(|&s| {
                let out = simulate_cell(&links, 0, &powers, &config, s).unwrap();
                let u = out.users[0][1];
                (u.mc_mean.unwrap() - truth).abs() <= u.mc_ci95.unwrap()
            })
            .count();
        assert!(covered >= 90, "{covered}");
    }
}
