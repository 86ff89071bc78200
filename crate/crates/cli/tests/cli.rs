//! End-to-end tests of the binary: exit codes, report schema, determinism,
//! and the documented configuration error paths.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fracext")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("FRACEXT_OUT")
        .output()
        .expect("binary should launch")
}

fn read_report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report.json exists");
    serde_json::from_str(&text).expect("report.json parses")
}

#[test]
fn limits_run_passes_with_exit_zero() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "verify",
        "--suite",
        "limits",
        "--spec",
        spec.to_str().unwrap(),
        "--sigma",
        "0.5",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );

    let rep = read_report(out.path());
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["suite"], "limits");
    assert_eq!(rep["sigma"], 0.5);
    assert_eq!(rep["passed"], true);
    let coeff = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "scalar-mode-coefficient")
        .expect("coefficient check present");
    let observed = coeff["observed"].as_f64().unwrap();
    assert!(
        (observed + 1.0).abs() <= 1e-4,
        "half-power coefficient should be -1, got {observed}"
    );
    assert!(out.path().join("limits.csv").exists());
}

#[test]
fn missing_grid_field_exits_two_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("nogrid.json");
    std::fs::write(&spec, r#"{"coefficients": {"kind": "identity"}}"#).unwrap();
    let res = run(&[
        "assemble",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("$.grid"), "stderr should name the offending path: {stderr}");
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("broken.json");
    std::fs::write(&spec, "{\"grid\": {").unwrap();
    let res = run(&[
        "assemble",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn out_of_range_sigma_exits_two() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "verify",
        "--suite",
        "harnack",
        "--spec",
        spec.to_str().unwrap(),
        "--sigma",
        "1.5",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("1.5"), "stderr should quote the power: {stderr}");
}

#[test]
fn wrong_assembly_family_exits_two() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "verify",
        "--suite",
        "subelliptic",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unknown_tolerance_exits_two() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "verify",
        "--suite",
        "limits",
        "--spec",
        spec.to_str().unwrap(),
        "--sigma",
        "0.5",
        "--tol",
        "bogus=1",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("bogus"), "stderr should name the tolerance: {stderr}");
}

#[test]
fn impossible_tolerance_fails_with_exit_one() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "verify",
        "--suite",
        "limits",
        "--spec",
        spec.to_str().unwrap(),
        "--sigma",
        "0.5",
        "--tol",
        "limit-rel=1e-18",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let rep = read_report(out.path());
    assert_eq!(rep["passed"], false);
    assert_eq!(rep["tolerances"]["limit-rel"], 1e-18);
}

#[test]
fn same_seed_gives_identical_reports_modulo_timings() {
    let spec = fixture("line.json");
    let mut trimmed = Vec::new();
    let mut artifact = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        let res = run(&[
            "verify",
            "--suite",
            "limits",
            "--spec",
            spec.to_str().unwrap(),
            "--sigma",
            "0.5",
            "--seed",
            "7",
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert!(res.status.success());
        let mut rep = read_report(out.path());
        rep.as_object_mut().unwrap().remove("timings");
        trimmed.push(serde_json::to_vec(&rep).unwrap());
        artifact.push(std::fs::read(out.path().join("limits.csv")).unwrap());
    }
    assert_eq!(trimmed[0], trimmed[1], "reports must agree outside the timings block");
    assert_eq!(artifact[0], artifact[1], "artifacts must be byte-identical");
}

#[test]
fn env_variable_overrides_out_flag() {
    let envdir = tempfile::tempdir().unwrap();
    let ignored = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = Command::new(bin())
        .args([
            "assemble",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            ignored.path().join("sub").to_str().unwrap(),
        ])
        .env("FRACEXT_OUT", envdir.path())
        .output()
        .expect("binary should launch");
    assert!(res.status.success());
    assert!(envdir.path().join("report.json").exists());
    assert!(!ignored.path().join("sub").exists());
}

#[test]
fn fracpow_routes_agree_on_self_adjoint_operator() {
    let out = tempfile::tempdir().unwrap();
    let spec = fixture("line.json");
    let res = run(&[
        "fracpow",
        "--spec",
        spec.to_str().unwrap(),
        "--sigma",
        "0.5",
        "--seed",
        "3",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rep = read_report(out.path());
    let agree = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "route-agreement")
        .expect("route check present");
    assert_eq!(agree["status"], "pass");
    assert!(out.path().join("power.csv").exists());
}
