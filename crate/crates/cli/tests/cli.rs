//! End-to-end runs of the `mimo-se` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mimo-se");

const SMALL: &str = r#"
[scenario]
id = "small"
cells = 4
users = 2

[radio]
tau_p = 2

[run]
m_values = [2, 4]
k_values = [1, 2]
n_drops = 2
n_realizations = 6
seed = 11
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MIMO_SIM_THREADS").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("in.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn simulate(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_all_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = simulate(&cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("results.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario_id,M,K,L,user,estimator,method,se_bits_per_hz,ci95,n_samples"
    );
    // (M, K) pairs x (K users + sum + total) x 2 estimators x 3 methods.
    let expected: usize = [2, 4].len() * [1 + 2, 2 + 2].iter().sum::<usize>() * 2 * 3;
    assert_eq!(csv.lines().count() - 1, expected);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 10);
        assert_eq!(f[3], "4");
        assert_eq!(f[8].is_empty(), f[6] != "mc", "{line}");
    }
    assert!(out.join("summary.json").exists());
    assert!(out.join("config.toml").exists());
}

#[test]
fn reruns_and_thread_counts_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(code(&simulate(&cfg, &a, &["--threads", "1"])), 0);
    assert_eq!(code(&simulate(&cfg, &b, &["--threads", "1"])), 0);
    let o = Command::new(BIN)
        .args(["simulate", "--config", &cfg, "--out", c.to_str().unwrap()])
        .env("MIMO_SIM_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let ra = read(&a.join("results.csv"));
    assert_eq!(ra, read(&b.join("results.csv")));
    assert_eq!(ra, read(&c.join("results.csv")));
}

#[test]
fn echo_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let first = tmp.path().join("first");
    assert_eq!(code(&simulate(&cfg, &first, &["--seed", "99", "--drops", "1"])), 0);
    let echo = first.join("config.toml");
    let echo_text = read(&echo);
    assert!(echo_text.contains("seed = 99"));
    assert!(echo_text.contains("n_drops = 1"));

    let second = tmp.path().join("second");
    assert_eq!(code(&simulate(echo.to_str().unwrap(), &second, &[])), 0);
    assert_eq!(read(&first.join("results.csv")), read(&second.join("results.csv")));
}

#[test]
fn summary_sums_match_csv_users() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert_eq!(code(&simulate(&cfg, &out, &[])), 0);
    let csv = read(&out.join("results.csv"));
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let aggregates = summary["aggregates"].as_array().unwrap();
    let sums: Vec<_> = aggregates.iter().filter(|a| a["user"] == "sum").collect();
    assert_eq!(sums.len(), 2 * 2 * 2 * 3);
    for s in sums {
        let key = |r: &Vec<String>| {
            r[1] == s["M"].as_u64().unwrap().to_string()
                && r[2] == s["K"].as_u64().unwrap().to_string()
                && r[5] == s["estimator"].as_str().unwrap()
                && r[6] == s["method"].as_str().unwrap()
        };
        let per_user: f64 = rows
            .iter()
            .filter(|r| key(r) && r[4].parse::<usize>().is_ok())
            .map(|r| r[7].parse::<f64>().unwrap())
            .sum();
        let value = s["se_bits_per_hz"].as_f64().unwrap();
        assert!((per_user - value).abs() <= 1e-12 * value.abs().max(1.0), "{s}: {per_user}");
    }
}

#[test]
fn sweeps_fix_the_other_axis() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let m = tmp.path().join("m");
    let k = tmp.path().join("k");
    assert_eq!(code(&run(&["sweep-m", "--config", &cfg, "--out", m.to_str().unwrap(), "--format", "csv"])), 0);
    assert_eq!(code(&run(&["sweep-k", "--config", &cfg, "--out", k.to_str().unwrap(), "--format", "csv"])), 0);
    assert!(!m.join("summary.json").exists());
    let ms = read(&m.join("results.csv"));
    assert!(ms.lines().skip(1).all(|l| l.split(',').nth(2) == Some("2")));
    let ks = read(&k.join("results.csv"));
    assert!(ks.lines().skip(1).all(|l| l.split(',').nth(1) == Some("4")));
    assert!(ks.lines().any(|l| l.split(',').nth(2) == Some("1")));
}

#[test]
fn preset_variants_get_their_own_directories() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    let o = run(&["preset", "fig5c", "--drops", "1", "--realizations", "1", "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for id in ["fig5c-correlated", "fig5c-uncorrelated"] {
        let csv = read(&out.join(id).join("results.csv"));
        assert!(csv.lines().nth(1).unwrap().starts_with(&format!("{id},10,10,16,")));
        assert!(read(&out.join(id).join("config.toml")).contains("cluster_angle_override = true"));
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let unknown = write_config(tmp.path(), "[radio]\nnoise_power = 1\n");
    assert_eq!(code(&run(&["simulate", "--config", &unknown, "--out", out])), 2);
    let too_many = write_config(tmp.path(), "[scenario]\nusers = 12\n[run]\nk_values = [12]\n");
    assert_eq!(code(&run(&["simulate", "--config", &too_many, "--out", out])), 2);
    let syntax = write_config(tmp.path(), "[run\n");
    assert_eq!(code(&run(&["simulate", "--config", &syntax, "--out", out])), 2);
    assert_eq!(code(&run(&["simulate", "--config", "/nonexistent/x.toml"])), 2);
    assert_eq!(code(&run(&["preset", "fig99"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["validate-moments", "--trials", "0"])), 2);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = simulate(&cfg, &blocker.join("sub"), &["--drops", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn moment_validation_exit_codes() {
    let quick = ["validate-moments", "--trials", "4", "--samples", "20000", "--quartic-samples", "20000"];
    let o = run(&quick);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max deviation"));
    let mut corrupt = quick.to_vec();
    corrupt.extend_from_slice(&["--corrupt", "quartic"]);
    assert_eq!(code(&run(&corrupt)), 1);
}
