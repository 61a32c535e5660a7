use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopcalc")).args(args).env("RUST_BACKTRACE", "0").output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn grid(dir: &Path, rows: &str, cols: &str, seed: &str) -> String {
    let path = dir.join(format!("g{rows}x{cols}_{seed}.json"));
    let p = path.to_str().unwrap();
    let out = run(&["gen-grid", "--rows", rows, "--cols", cols, "--beta", "0.5", "--theta", "0.1", "--seed", seed, "--out", p]);
    assert!(out.status.success());
    p.to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn gen_grid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = grid(dir.path(), "3", "3", "7");
    let b = run(&["gen-grid", "--rows", "3", "--cols", "3", "--beta", "0.5", "--theta", "0.1", "--seed", "7"]);
    assert_eq!(fs::read_to_string(a).unwrap().trim(), String::from_utf8(b.stdout).unwrap().trim());
}

#[test]
fn exact_bp_and_series_agree() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "7");
    let exact = f(&ok_json(&["exact", "--in", &g])["log_z"]);
    let bp = ok_json(&["bp", "--in", &g]);
    assert_eq!(bp["converged"], Value::Bool(true));
    assert!(f(&bp["iterations"]) >= 1.0);
    let terms = dir.path().join("terms.csv");
    let s = ok_json(&["pfseries", "--in", &g, "--out", terms.to_str().unwrap()]);
    assert_eq!(s["truncation"], "exhausted");
    assert!((f(&s["log_z"]) - exact).abs() < 1e-9);
    let csv = fs::read_to_string(terms).unwrap();
    assert!(csv.starts_with("psi,z_psi,mu_prefactor,Z_psi,running_z,ms"));
    assert_eq!(csv.lines().count() as f64, f(&s["terms"]) + 1.0);
}

#[test]
fn full_loop_series_and_two_regular_part() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "1");
    let exact = f(&ok_json(&["exact", "--in", &g])["log_z"]);
    let all = ok_json(&["loops", "--in", &g, "--max-edges", "40", "--truncate", "2"]);
    assert!((f(&all["log_z"]) - exact).abs() < 1e-9);
    assert_eq!(f(&all["truncated"]["l"]), 2.0);
    let n = all["loops"].as_array().unwrap().len();
    assert_eq!(n as f64, f(&all["count"]));
    assert!(all["loops"][0]["r_C"].is_number());

    let two = ok_json(&["loops", "--in", &g, "--max-edges", "40", "--two-regular"]);
    let z = ok_json(&["zempty", "--in", &g]);
    assert!((f(&two["log_z"]) - f(&z["log_z_empty"])).abs() < 1e-10);
    assert!(f(&two["count"]) < f(&all["count"]));
}

#[test]
fn loops_respects_edge_cap() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "1");
    let out = run(&["loops", "--in", &g, "--max-edges", "8"]);
    assert!(!out.status.success());
}

#[test]
fn extend_then_match() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "7");
    let ext = dir.path().join("ext.json");
    let out = run(&["extend", "--in", &g, "--out", ext.to_str().unwrap()]);
    assert!(out.status.success());
    let m = ok_json(&["matchings", "--in", ext.to_str().unwrap(), "--max-ports", "100", "--list"]);
    let ws = f(&m["weighted_sum"]);
    assert!((f(&m["pfaffian_a"]) - ws).abs() < 1e-12 * ws.abs().max(1.0));
    assert_eq!(f(&m["pfaffian_b"]).round(), f(&m["count"]));
    assert_eq!(m["matchings"].as_array().unwrap().len() as f64, f(&m["count"]));
    let z = ok_json(&["zempty", "--in", &g]);
    assert!((f(&z["z_empty"]) - ws).abs() < 1e-12);
    assert_eq!(z["n_gext"], m["ports"]);
}

#[test]
fn extend_rejects_bad_psi() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "7");
    for psi in ["22", "abc", "100000"] {
        let out = run(&["extend", "--in", &g, "--psi", psi]);
        assert!(!out.status.success(), "psi {psi} accepted");
    }
}

#[test]
fn matchings_port_cap() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(dir.path(), "3", "3", "7");
    let ext = dir.path().join("ext.json");
    assert!(run(&["extend", "--in", &g, "--out", ext.to_str().unwrap()]).status.success());
    assert!(!run(&["matchings", "--in", ext.to_str().unwrap()]).status.success());
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"sizes": [[3, 3]], "betas": [0.5], "thetas": [0.1], "instances": 3, "seed_base": 11}"#).unwrap();
    let out = dir.path().join("results.csv");
    let r = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);
    let summary = dir.path().join("results.summary.csv");
    assert_eq!(fs::read_to_string(summary).unwrap().lines().count(), 2);
}

#[test]
fn experiment_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    for body in ["", r#"{"betas": [-1.0]}"#, r#"{"bogus": 1}"#] {
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, body).unwrap();
        let r = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(!r.status.success(), "config {body:?} accepted");
    }
}

#[test]
fn missing_input_fails() {
    assert!(!run(&["exact", "--in", "/nonexistent/graph.json"]).status.success());
}
