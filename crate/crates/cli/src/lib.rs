//! Command-line front end for the `mimo-se` simulator.
//!
//! Exit codes: 0 success, 1 moment validation failure, 2 configuration
//! error, 3 runtime error.

pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use mimo_se::montecarlo::{run_grid, MonteCarloError, RunConfig, SweepResult};
use mimo_se::validation::{validate_moments, Identity, ValidationError, ValidationOptions, ValidationReport};

use config::{parse_config, ConfigError, ConfigFile, Format};
use output::OutputError;

pub const THREADS_ENV: &str = "MIMO_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mimo-se", version, about = "Massive MIMO uplink spectral-efficiency simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (M, K) pair of the configuration.
    Simulate(RunArgs),
    /// Sweep M at K = scenario.users.
    SweepM(RunArgs),
    /// Sweep K at the largest M of the configuration.
    SweepK(RunArgs),
    /// Run a named figure scenario; each variant goes to `<out>/<id>/`.
    Preset {
        name: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Check the moment identities against sampling.
    ValidateMoments(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<FormatArg>>,
    #[arg(long)]
    pub drops: Option<usize>,
    #[arg(long)]
    pub realizations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000_000)]
    pub quartic_samples: usize,
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Scale one closed form by 1.1 so that the check must fail.
    #[arg(long, value_enum, hide = true)]
    pub corrupt: Option<IdentityArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IdentityArg {
    Quadratic,
    Outer,
    Quartic,
    NormFourth,
}

impl From<IdentityArg> for Identity {
    fn from(a: IdentityArg) -> Self {
        match a {
            IdentityArg::Quadratic => Identity::Quadratic,
            IdentityArg::Outer => Identity::Outer,
            IdentityArg::Quartic => Identity::Quartic,
            IdentityArg::NormFourth => Identity::NormFourth,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("moment validation failed")]
    ValidationFailed(ValidationReport),
    #[error(transparent)]
    Simulation(#[from] MonteCarloError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Simulation(MonteCarloError::InvalidConfig(_) | MonteCarloError::Scenario(_)) => 2,
            CliError::Simulation(_) | CliError::Output(_) | CliError::ThreadPool(_) => 3,
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Config(ConfigError::OutOfRange(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sweep {
    Grid,
    Antennas,
    Users,
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config(ConfigError::OutOfRange("threads must be at least 1".into()))),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Loads the configuration and applies the command-line overrides, so that
/// the echo written with the results reproduces the run on its own.
fn resolve(base: Option<ConfigFile>, args: &RunArgs) -> Result<ConfigFile, CliError> {
    let mut file = match (base, &args.config) {
        (Some(c), _) => c,
        (None, Some(path)) => parse_config(path)?.0,
        (None, None) => ConfigFile::default(),
    };
    if let Some(seed) = args.seed {
        file.run.seed = seed;
    }
    if let Some(out) = &args.out {
        file.output.directory = out.clone();
    }
    if let Some(formats) = &args.format {
        file.output.formats = formats
            .iter()
            .map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            })
            .collect();
    }
    if let Some(d) = args.drops {
        file.run.n_drops = d;
    }
    if let Some(r) = args.realizations {
        file.run.n_realizations = r;
    }
    Ok(file)
}

fn sweep_config(mut file: ConfigFile, sweep: Sweep) -> ConfigFile {
    match sweep {
        Sweep::Grid => {}
        Sweep::Antennas => file.run.k_values = vec![file.scenario.users],
        Sweep::Users => {
            let m = file.run.m_values.iter().copied().max();
            file.run.m_values = m.into_iter().collect();
        }
    }
    file
}

/// Runs one resolved configuration and writes its results into `dir`.
pub fn run_config(file: &ConfigFile, dir: &Path, threads: Option<usize>) -> Result<SweepResult, CliError> {
    let run: RunConfig = file.to_run_config()?;
    let result = in_pool(threads, || run_grid(&run, &run.m_values, &run.k_values))??;
    let written = output::emit_results(file, &result, dir)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(result)
}

fn run_sweep(args: &RunArgs, sweep: Sweep) -> Result<(), CliError> {
    let file = sweep_config(resolve(None, args)?, sweep);
    let dir = file.output.directory.clone();
    run_config(&file, &dir, args.threads)?;
    Ok(())
}

fn run_preset(name: &str, args: &RunArgs) -> Result<(), CliError> {
    if args.config.is_some() {
        return Err(ConfigError::OutOfRange("--config cannot be combined with a preset".into()).into());
    }
    let variants = presets::preset(name)?;
    let mut resolved = Vec::with_capacity(variants.len());
    for v in variants {
        let file = resolve(Some(v), args)?;
        file.to_run_config()?;
        resolved.push(file);
    }
    for mut file in resolved {
        let dir = file.output.directory.join(&file.scenario.id);
        file.output.directory = dir.clone();
        run_config(&file, &dir, args.threads)?;
    }
    Ok(())
}

fn run_validation(args: &ValidateArgs) -> Result<(), CliError> {
    let opts = ValidationOptions {
        seed: args.seed,
        trials: args.trials,
        samples: args.samples,
        quartic_samples: args.quartic_samples,
        corrupt: args.corrupt.map(Identity::from),
        ..ValidationOptions::default()
    };
    let report = in_pool(args.threads, || validate_moments(&opts))??;
    for id in Identity::ALL {
        println!(
            "{:<22} max deviation {:>6.2} sigma (threshold {})",
            id.as_str(),
            report.max_sigma(id),
            report.threshold
        );
    }
    if report.passed() {
        println!("all {} cases passed", report.cases.len());
        Ok(())
    } else {
        for c in report.failures() {
            eprintln!(
                "FAIL {} instance {} (dim {}, {} samples): {:.2} sigma",
                c.identity.as_str(),
                c.instance,
                c.dim,
                c.samples,
                c.max_sigma
            );
        }
        Err(CliError::ValidationFailed(report))
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => run_sweep(a, Sweep::Grid),
        Command::SweepM(a) => run_sweep(a, Sweep::Antennas),
        Command::SweepK(a) => run_sweep(a, Sweep::Users),
        Command::Preset { name, args } => run_preset(name, args),
        Command::ValidateMoments(a) => run_validation(a),
    }
}

/// Parses the arguments, runs the command and maps the outcome to an exit
/// code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        let cfg = CliError::Config(ConfigError::UnknownKey("x".into()));
        assert_eq!(cfg.exit_code(), 2);
        let bad = CliError::Simulation(MonteCarloError::InvalidConfig("x".into()));
        assert_eq!(bad.exit_code(), 2);
        let io = CliError::Output(OutputError::Io {
            path: "x".into(),
            source: std::io::Error::other("x"),
        });
        assert_eq!(io.exit_code(), 3);
        let v = CliError::ValidationFailed(ValidationReport { threshold: 5.0, cases: vec![] });
        assert_eq!(v.exit_code(), 1);
    }

    #[test]
    fn user_sweep_uses_largest_antenna_count() {
        let mut f = ConfigFile::default();
        f.run.m_values = vec![10, 40, 20];
        f.run.k_values = vec![1, 5, 10];
        f.scenario.users = 5;
        let s = sweep_config(f, Sweep::Users);
        assert_eq!(s.run.m_values, vec![40]);
        assert_eq!(s.run.k_values, vec![1, 5, 10]);
    }

    #[test]
    fn antenna_sweep_pins_users() {
        let mut f = ConfigFile::default();
        f.scenario.users = 4;
        f.run.k_values = vec![1, 2];
        assert_eq!(sweep_config(f, Sweep::Antennas).run.k_values, vec![4]);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
