use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str], config: Option<&Value>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_transport-spectra"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(cfg) = config {
        let path = dir.join("config.json");
        fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().expect("binary runs")
}

fn base() -> Value {
    json!({
        "domain": { "kind": "disk", "center": [0.0, 0.0], "radius": 1.0 },
        "sigma": { "kind": "constant", "value": 1.0 },
        "gamma": 0.5,
        "grid": { "spatial": [4, 8], "speed_range": [1.0, 2.0], "speeds": 2, "angles": 8 }
    })
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_bound_on_unit_disk() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["grid"] =
        json!({ "spatial": [16, 32], "speed_range": [1.0, 2.0], "speeds": 5, "angles": 32 });
    cfg["spectrum"] = json!({ "k_max": 1 });
    let out = run(&["spectrum"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path(), "spectrum.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# transport-spectra spectrum v1"));
    assert_eq!(lines.next(), Some("x,y,vx,vy,k,re,im,tau,theta"));
    let max_re = lines
        .map(|l| l.split(',').nth(5).unwrap().parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    assert!((max_re - (-1.3465736)).abs() < 1e-3, "{max_re}");
    let meta: Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    assert_eq!(meta["command"], "spectrum");
    assert_eq!(meta["results"]["resolvent_set_above_bound"]["inside"], true);
}

#[test]
fn gamma_out_of_range_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["gamma"] = json!(1.5);
    let out = run(&["spectrum"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("γ must lie in (0,1]"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["colour"] = json!("blue");
    let out = run(&["evolve"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"));

    let mut cfg = base();
    cfg["sigma"]["slope"] = json!(1.0);
    assert_eq!(
        run(&["evolve"], Some(&cfg), dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn position_dependent_sigma_rejected_for_semigroup() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["sigma"] = json!({ "kind": "position_quadratic", "base": 1.0, "curvature": 0.5 });
    let out = run(&["evolve"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["spectrum"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn oversized_grid_is_a_resource_limit() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["grid"]["spatial"] = json!([2000, 2000]);
    let out = run(&["evolve"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn missing_config_is_invalid() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["dyson"], None, dir.path()).status.code(), Some(2));
}

#[test]
fn output_is_byte_identical_across_thread_counts() {
    let mut cfg = base();
    cfg["kernel"] =
        json!({ "support": [1.0, 2.0], "terms": [{ "beta_scale": 0.5, "theta_scale": 0.5 }] });
    cfg["dyson"] = json!({ "t": 0.5, "j_max": 2, "nodes_per_unit_time": 16, "r1_rank": 4 });
    for command in ["spectrum", "dyson", "resolvent-verify"] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        let oa = run(
            &[command, "--threads", "1", "--seed", "9"],
            Some(&cfg),
            a.path(),
        );
        let ob = run(
            &[command, "--threads", "3", "--seed", "9"],
            Some(&cfg),
            b.path(),
        );
        assert!(
            oa.status.success() && ob.status.success(),
            "{}",
            stderr(&oa)
        );
        for entry in fs::read_dir(a.path().join("out")).unwrap() {
            let name = entry.unwrap().file_name();
            let name = name.to_str().unwrap();
            assert_eq!(
                read(a.path(), name),
                read(b.path(), name),
                "{command}: {name}"
            );
        }
    }
}

#[test]
fn evolve_reports_contraction() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["initial"] = json!({ "kind": "gaussian", "center": [0.2, 0.0], "width": 0.4 });
    cfg["evolve"] = json!({ "times": [0.0, 0.5, 2.0] });
    let out = run(&["evolve"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(dir.path(), "evolve.csv")
        .starts_with("# transport-spectra evolve v1\nt,x,y,vx,vy,re,im,weight\n"));
    let meta: Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    for n in meta["results"]["norms"].as_array().unwrap() {
        assert!(
            n["l2_norm"].as_f64().unwrap()
                <= n["contraction_bound"].as_f64().unwrap() * (1.0 + 1e-12)
        );
    }
}

#[test]
fn resolvent_verify_agrees_with_laplace_transform() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["resolvent_verify"] = json!({ "lambdas": [[0.0, 0.0], [-0.5, 4.0]], "samples": 10, "tol": 1e-9, "boundary_resolution": 12 });
    let out = run(&["resolvent-verify"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let meta: Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    for r in meta["results"]["per_lambda"].as_array().unwrap() {
        assert!(r["max_rel_error"].as_f64().unwrap() < 1e-4);
        assert!(r["boundary_residual"].as_f64().unwrap() < 1e-8);
    }

    cfg["resolvent_verify"]["lambdas"] = json!([[-1.5, 0.0]]);
    assert_eq!(
        run(&["resolvent-verify"], Some(&cfg), dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn dyson_and_rl_scan_run() {
    let dir = TempDir::new().unwrap();
    let mut cfg = base();
    cfg["kernel"] = json!({ "support": [1.0, 2.0], "terms": [{ "alpha": 1.0, "beta_scale": 0.3, "theta_scale": 0.3 }] });
    cfg["dyson"] = json!({ "t": 1.0, "j_max": 4, "nodes_per_unit_time": 32 });
    cfg["gamma"] = json!(1.0);
    cfg["rl_scan"] = json!({ "alpha": 0.0, "betas": [0.0, 100.0], "n": 0, "parity": "odd", "cells": 6, "directions": 8 });
    let out = run(&["dyson"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let meta: Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    assert!(meta["results"]["duhamel_residual"].as_f64().unwrap() < 1e-4);

    let out = run(&["rl-scan"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path(), "rl_scan.csv");
    assert!(csv.starts_with("# transport-spectra rl-scan v1\nbeta,estimate,envelope\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let out = run(&["selftest", "--seed", "11"], None, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(dir.path(), "selftest.csv")
        .lines()
        .skip(2)
        .all(|l| l.ends_with(",true")));
}
