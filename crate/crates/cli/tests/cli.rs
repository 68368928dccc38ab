//! Black-box tests of the command-line surface: exit codes, strict config
//! parsing, and the documented output artifacts.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orlicz-hjb"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn solve_1d_config(out: &Path) -> String {
    format!(
        r#"{{
  "command": "solve",
  "output": "{}",
  "model": {{"kind": "logistic-1d", "a": 0.02, "alpha": 1.0}},
  "jumps": {{"z_lo": -1.0, "z_hi": 0.0, "density": "uniform"}},
  "risk": {{"p": 2.0, "psi": 0.01, "delta": 0.1, "lambda_n": 0.05, "lambda_z": 0.0}},
  "grid": {{"extent1": 1.0, "n1": 50}},
  "quadrature": {{"m": 50}},
  "solver": {{"gamma": 0.5, "tol": 1e-9, "max_iters": 3000}}
}}"#,
        out.display()
    )
}

#[test]
fn unknown_config_key_is_rejected_before_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"mystery_knob": 3}"#);
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn empty_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    write(&cfg, "{}");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &solve_1d_config(&out));
    let status = bin()
        .args(["calibrate", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn solve_writes_artifacts_and_is_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &solve_1d_config(&out1));
    let status = bin().args(["solve", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["value.csv", "policy.csv", "report.json", "report.txt"] {
        assert!(out1.join(f).is_file(), "{f} missing");
    }
    // same config, different out dir: identical numerical artifacts
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let a = std::fs::read_to_string(out1.join("value.csv")).unwrap();
    let b = std::fs::read_to_string(out2.join("value.csv")).unwrap();
    assert_eq!(a, b);
    // report echoes enough to re-run: the config block is embedded
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("report.json")).unwrap()).unwrap();
    assert!(report["config"]["model"].is_object());
    assert!(report["wall_time_s"].is_number());
    assert_eq!(report["result"]["converged"], serde_json::Value::Bool(true));
}

#[test]
fn exact_compare_writes_per_resolution_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
  "output": "{}",
  "model": {{"kind": "logistic-1d", "a": 0.02, "alpha": 0.5}},
  "jumps": {{"z_lo": -1.0, "z_hi": 0.0, "density": "uniform"}},
  "risk": {{"p": 2.0, "psi": 0.01, "delta": 0.1, "lambda_n": 0.05, "lambda_z": 0.0}},
  "solver": {{"gamma": 0.5, "tol": 1e-9, "max_iters": 3000}},
  "exact_compare": {{"resolutions": [40, 80]}}
}}"#,
            out.display()
        ),
    );
    let status = bin()
        .args(["exact-compare", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["exact_compare_40.csv", "exact_compare_80.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let table = std::fs::read_to_string(out.join("exact_compare_40.csv")).unwrap();
    assert!(table.starts_with("x1,numerical_F,exact_F,abs_error,rel_error"));
    assert_eq!(table.lines().count(), 42); // header + 41 vertices
}

#[test]
fn calibrate_fits_bundled_stations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/stations_b1.csv");
    write(
        &cfg,
        &format!(
            r#"{{
  "output": "{}",
  "calibrate": {{
    "input": "{}",
    "divisor": 480.0,
    "settings": {{"starts": 4, "max_evals": 800, "seed": 11}}
  }}
}}"#,
            out.display(),
            data.display()
        ),
    );
    let status = bin()
        .args(["calibrate", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let fits = std::fs::read_to_string(out.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 8); // header + 7 stations
    let trajs = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert_eq!(trajs.lines().count(), 1 + 7 * 6);
}

#[test]
fn verify_fault_injection_fails_with_numerical_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
  "output": "{}",
  "verify": {{"trials": 50, "seed": 3, "fault": "divergence-sign-flip"}}
}}"#,
            out.display()
        ),
    );
    let output = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["all_passed"], serde_json::Value::Bool(false));
    let nonneg = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "divergence-nonnegative")
        .unwrap();
    assert_eq!(nonneg["passed"], serde_json::Value::Bool(false));
    assert!(nonneg["counterexample"].is_string());
}

#[test]
fn verify_default_passes_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(r#"{{"output": "{}", "verify": {{"trials": 60}}}}"#, out.display()),
    );
    for seed in ["1", "99991"] {
        let status = bin()
            .args(["verify", "--config"])
            .arg(&cfg)
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "seed {seed}");
    }
}

#[test]
fn simulate_null_policy_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
  "output": "{}",
  "model": {{"kind": "linear-1d", "a": 0.02, "alpha": 1.0}},
  "jumps": {{"z_lo": -1.0, "z_hi": 0.0, "density": "uniform"}},
  "risk": {{"p": 2.0, "psi": 0.01, "delta": 0.1, "lambda_n": 0.05, "lambda_z": 0.0}},
  "quadrature": {{"m": 64}},
  "sim": {{"horizon": 30.0, "paths": 200, "seed": 5, "state0": [0.5, 0.0], "policy": "null"}}
}}"#,
            out.display()
        ),
    );
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let est = std::fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert!(est.starts_with("x1,x2,mean,stderr,paths,T,truncation_bound"));
    assert_eq!(est.lines().count(), 2);
}
