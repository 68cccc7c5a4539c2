//! Result files.
//!
//! Every output directory holds `config.toml` (the resolved configuration),
//! plus `results.csv` and/or `summary.json` depending on the requested
//! formats. Numbers are written with the shortest representation that reads
//! back to the same `f64`, so identical results give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use mimo_se::montecarlo::{monotonicity_violations, SweepResult, SweepRow, UserLabel};

use crate::config::{ConfigFile, Format};

pub const CSV_HEADER: [&str; 10] = [
    "scenario_id",
    "M",
    "K",
    "L",
    "user",
    "estimator",
    "method",
    "se_bits_per_hz",
    "ci95",
    "n_samples",
];

pub const CSV_FILE: &str = "results.csv";
pub const JSON_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

fn record(row: &SweepRow) -> [String; 10] {
    [
        row.scenario_id.clone(),
        row.antennas.to_string(),
        row.users.to_string(),
        row.cells.to_string(),
        row.user.to_string(),
        row.estimator.as_str().to_string(),
        row.method.as_str().to_string(),
        row.se.to_string(),
        row.ci95.map(|c| c.to_string()).unwrap_or_default(),
        row.n_samples.to_string(),
    ]
}

/// Writes the rows as CSV. An empty slice gives the header alone.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), OutputError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

fn row_json(row: &SweepRow) -> Value {
    json!({
        "M": row.antennas,
        "K": row.users,
        "L": row.cells,
        "user": row.user.to_string(),
        "estimator": row.estimator.as_str(),
        "method": row.method.as_str(),
        "se_bits_per_hz": row.se,
        "ci95": row.ci95,
        "n_samples": row.n_samples,
    })
}

/// Resolved configuration, the `sum` and `total` rows, and any place where
/// a closed-form sum decreases with `M`.
pub fn summary_json(config: &ConfigFile, result: &SweepResult) -> Value {
    let aggregates: Vec<Value> = result
        .rows
        .iter()
        .filter(|r| matches!(r.user, UserLabel::Sum | UserLabel::Total))
        .map(row_json)
        .collect();
    let violations: Vec<Value> = monotonicity_violations(result)
        .iter()
        .map(|v| {
            json!({
                "K": v.users,
                "estimator": v.estimator.as_str(),
                "from_M": v.from_antennas,
                "to_M": v.to_antennas,
                "drop_in_se": v.drop_in_se,
            })
        })
        .collect();
    json!({
        "scenario_id": config.scenario.id,
        "config": config,
        "drops": result.drops.len(),
        "aggregates": aggregates,
        "monotonicity_violations": violations,
    })
}

/// Writes the config echo and the requested result files into `dir`.
/// Returns the paths written.
pub fn emit_results(config: &ConfigFile, result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join(CONFIG_FILE);
    fs::write(&path, config.echo()).map_err(io_err(&path))?;
    written.push(path);

    if config.output.formats.contains(&Format::Csv) {
        let path = dir.join(CSV_FILE);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_csv(&result.rows, std::io::BufWriter::new(file))?;
        written.push(path);
    }
    if config.output.formats.contains(&Format::Json) {
        let path = dir.join(JSON_FILE);
        let mut text = serde_json::to_string_pretty(&summary_json(config, result))?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
