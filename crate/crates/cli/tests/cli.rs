use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l2approx"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_suites_pass() {
    for suite in ["traces", "squeeze", "determinant", "whitehead", "subgroup"] {
        let out = run(&["verify", suite]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{suite}: {stdout}");
        assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    }
}

#[test]
fn determinant_suite_honours_seed() {
    let out = bin()
        .args(["verify", "determinant"])
        .env("L2APPROX_SEED", "12345")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(run(&["verify", "unknown"]).status.code(), Some(2));
}

#[test]
fn malformed_problem_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"group\": ").unwrap();
    let out = run(&["density", arg(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(
        run(&["density", "/nonexistent/file.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn density_csv_of_circle_laplacian() {
    let out = run(&[
        "density",
        arg(&fixture("zd_laplacian.json")),
        "--levels",
        "64",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,F"));
    assert_eq!(lines.next(), Some("0,0.015625"));
    assert_eq!(text.lines().last(), Some("4,1"));
}

#[test]
fn density_of_identity_is_a_single_jump() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("id.json");
    std::fs::write(
        &problem,
        r#"{"group": {"type": "free_abelian", "rank": 1},
            "matrix": {"rows": 1, "cols": 1, "entries": [[[{"word": [0], "re": "1"}]]]}}"#,
    )
    .unwrap();
    let out = run(&["density", arg(&problem), "--levels", "8"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "lambda,F\n1,1\n");

    let target = dir.path().join("density.json");
    let out = run(&[
        "--output",
        arg(&target),
        "density",
        arg(&problem),
        "--levels",
        "8",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["density"]["jumps"][0]["lambda"], 1.0);
}

#[test]
fn approx_reports_f0_column() {
    let out = run(&["approx", arg(&fixture("zd_laplacian.json"))]);
    assert!(out.status.success());
    let v = json(&out);
    let f0: Vec<f64> = v["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["f0"].as_f64().unwrap())
        .collect();
    let expected: Vec<f64> = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]
        .iter()
        .map(|n| 1.0 / n)
        .collect();
    assert_eq!(f0, expected);
    for key in [
        "squeeze",
        "determinant",
        "sandwich",
        "traces",
        "norm_bound",
        "betti_limit",
    ] {
        assert_eq!(v["verdicts"][key]["pass"], true, "{key}");
    }
    assert_eq!(v["defaults"]["tol"], 0.02);
    assert_eq!(v["oracle"]["method"], "torus_quadrature");
}

#[test]
fn approx_folner_has_trace_table() {
    let out = run(&["approx", arg(&fixture("zd_folner.json"))]);
    assert!(out.status.success());
    let v = json(&out);
    let rows = &v["verdicts"]["traces"]["detail"];
    assert_eq!(rows[0]["rows"][0]["level_exact"], "2");
    assert_eq!(rows[0]["rows"][1]["exact"], "6");
}

#[test]
fn too_few_levels_is_a_computation_error() {
    let out = run(&[
        "approx",
        arg(&fixture("zd_laplacian.json")),
        "--levels",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_property_exits_1() {
    let out = run(&[
        "--tol",
        "0.001",
        "approx",
        arg(&fixture("zd_laplacian.json")),
        "--levels",
        "8,16,32",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdicts"]["determinant"]["pass"], false);
}

#[test]
fn output_is_deterministic_across_job_counts() {
    let a = run(&["approx", arg(&fixture("whitehead.json"))]);
    let b = run(&["--jobs", "1", "approx", arg(&fixture("whitehead.json"))]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn cw_fixtures() {
    let circle = json(&run(&["cw", arg(&fixture("circle.json"))]));
    assert!(circle["torsion"].as_f64().unwrap().abs() <= 0.02);

    let torus = json(&run(&["cw", arg(&fixture("torus.json"))]));
    for d in torus["degrees"].as_array().unwrap() {
        assert!(d["betti"].as_f64().unwrap() <= 0.02);
    }
    let tower = json(&run(&[
        "cw",
        arg(&fixture("torus.json")),
        "--levels",
        "16,32,64",
    ]));
    for d in tower["degrees"].as_array().unwrap() {
        assert!(d["betti"].as_f64().unwrap() <= 0.02);
    }

    let point = json(&run(&["cw", arg(&fixture("point.json"))]));
    assert_eq!(point["degrees"][0]["betti"], 1.0);
    assert!(point["torsion"].is_null());
}

#[test]
fn cw_rejects_non_complexes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"group": {"type": "free_abelian", "rank": 1}, "cells": [1, 1, 1],
            "boundaries": [
              {"rows": 1, "cols": 1, "entries": [[[{"word": [0], "re": "1"}]]]},
              {"rows": 1, "cols": 1, "entries": [[[{"word": [0], "re": "1"}]]]}]}"#,
    )
    .unwrap();
    assert_eq!(run(&["cw", arg(&path)]).status.code(), Some(3));
}
