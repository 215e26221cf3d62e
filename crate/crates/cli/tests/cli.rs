use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use timoshenko_core::io::{load_field, save_field, LEDGER_HEADER, REPORT_HEADER};
use timoshenko_core::{Grid, StateField};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timoshenko"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CONFIG: &str = r#"{
    "grid": {"L": 200, "N": 1024},
    "params": {"a": 1, "gamma": 1, "sigma": "sinh"},
    "data": {"kind": "gaussian", "amplitude": 0.01, "width": 4, "seed": 0},
    "times": {"log_range": {"start": 1, "end": 100, "count": 30}},
    "fit": {"t_lo": 20, "t_hi": 100, "tolerances": [0.1]},
    "norms": [{"ell": 0, "space": "l2"}]
}"#;

#[test]
fn symbol_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "symbol", "--a", "1", "--gamma", "1", "--xi-min", "1e-2", "--xi-max", "1e2", "--points", "200",
        "--eta", "1", "--out", path(&json), "--csv", path(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["xi"].as_array().unwrap().len(), 200);
    assert_eq!(report["max_re_lambda"].as_array().unwrap().len(), 200);
    assert_eq!(report["ratio"].as_array().unwrap().len(), 200);
    assert!(report["c_best"].as_f64().unwrap() > 0.0);
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    let rows = fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("xi,max_re_lambda,ratio\n"));
    assert_eq!(rows.lines().count(), 201);
}

#[test]
fn symbol_rejects_a_short_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["symbol", "--points", "10", "--out", path(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn besov_prints_norm_and_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    let grid = Grid::new(2.0 * std::f64::consts::PI, 64).unwrap();
    let c: Vec<f64> = grid.x().iter().map(|x| x.cos()).collect();
    let zero = vec![0.0; 64];
    save_field(&field, &StateField::new(grid, c, zero.clone(), zero.clone(), zero).unwrap()).unwrap();
    let out = run(&[
        "besov", "--input", path(&field), "--component", "v", "--s", "0", "--p", "2", "--r", "inf",
        "--homogeneous", "true",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let norm: f64 = lines.next().unwrap().strip_prefix("norm,").unwrap().parse().unwrap();
    assert!((norm - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    assert_eq!(lines.next(), Some("q,weighted_block_norm"));
    assert!(lines.count() >= 3);
}

#[test]
fn besov_rejects_bad_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    save_field(&field, &StateField::zeros(Grid::new(10.0, 16).unwrap())).unwrap();
    let out = run(&["besov", "--input", path(&field), "--component", "u", "--s", "1", "--p", "0.5"]);
    assert!(!out.status.success());
    let out = run(&["besov", "--input", path(&field), "--component", "w", "--s", "1"]);
    assert!(!out.status.success());
}

#[test]
fn evolve_writes_trajectory_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"grid": {"L": 40, "N": 256}, "params": {"a": 1, "gamma": 1},
            "data": {"kind": "gaussian", "amplitude": 0.01, "width": 2},
            "times": {"snapshots": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]}}"#,
    )
    .unwrap();
    for mode in ["linear", "nonlinear", "duhamel"] {
        let traj = dir.path().join(mode);
        let ledger = dir.path().join(format!("{mode}.csv"));
        let out = run(&[
            "evolve", "--mode", mode, "--config", path(&cfg), "--out", path(&traj), "--energies", path(&ledger),
        ]);
        assert!(out.status.success(), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(traj.join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta["grid"]["N"], 256);
        assert_eq!(meta["times"].as_array().unwrap().len(), 11);
        for f in meta["files"].as_array().unwrap() {
            let s = load_field(&traj.join(f.as_str().unwrap())).unwrap();
            assert_eq!(s.grid().n(), 256);
        }
        let text = fs::read_to_string(&ledger).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LEDGER_HEADER.join(","));
        let residuals: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(residuals.len(), 11);
        assert!(residuals.iter().all(|r| *r < 1e-5), "{mode}: {residuals:?}");
    }
}

#[test]
fn evolve_rejects_missing_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["evolve", "--config", "/nonexistent.json", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decay_exit_code_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let report = dir.path().join("report.csv");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = run(&["decay", "--config", path(&cfg), "--out", path(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), REPORT_HEADER.join(","));
    assert!(lines.next().unwrap().ends_with(",true"));

    fs::write(&cfg, SMALL_CONFIG.replace("[0.1]", "[0.0]")).unwrap();
    let out = run(&["decay", "--config", path(&cfg), "--out", path(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(fs::read_to_string(&report).unwrap().contains(",false"));
}

#[test]
fn decay_rejects_wrap_around() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL_CONFIG.replace("\"L\": 200", "\"L\": 150")).unwrap();
    let out = run(&["decay", "--config", path(&cfg), "--out", path(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wrap"));
}
