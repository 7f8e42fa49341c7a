use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use revbound::report::{read_report, Payload};

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revbound"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_accepts_the_demo_spec() {
    let out = run(&["--config", demo().to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["payload"]["type"], "validation");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn odd_coefficient_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.json");
    let spec =
        std::fs::read_to_string(demo())
            .unwrap()
            .replacen("fourier-cosine", "fourier-sine", 1);
    std::fs::write(&path, spec).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["payload"]["type"], "validation");
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"n\": 2,\n  \"a\": [\n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn period_matches_the_circle() {
    let out = run(&["period", "--n", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let p = stdout_json(&out)["payload"]["data"]["period"]
        .as_f64()
        .unwrap();
    assert!((p - std::f64::consts::TAU).abs() < 1e-12);
}

#[test]
fn chart_roundtrip_through_the_cli() {
    let out = run(&["aa", "--n", "2", "--rho", "4", "--theta", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let s = &v["payload"]["data"][0];
    let (x, y) = (s["x"].as_f64().unwrap(), s["y"].as_f64().unwrap());
    let (xa, ya) = (format!("--x={x}"), format!("--y={y}"));
    let back = run(&["aa", "--n", "2", &xa, &ya]);
    let w = stdout_json(&back);
    let r = &w["payload"]["data"][0];
    assert!((r["rho"].as_f64().unwrap() - 4.0).abs() < 1e-10);
    assert!((r["theta"].as_f64().unwrap() - 0.3).abs() < 1e-10);
}

#[test]
fn simulate_writes_csv_and_verifiable_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orbit.csv");
    let out = run(&[
        "--config",
        demo().to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "simulate",
        "--x0",
        "1",
        "--v0",
        "0",
        "--t1",
        "5",
        "--samples",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,v"));
    assert_eq!(lines.count(), 11);
    let json = csv.with_extension("json");
    let env = read_report(&json).unwrap();
    match env.payload {
        Payload::Trajectory(t) => assert_eq!(t.samples.len(), 11),
        other => panic!("unexpected payload {other:?}"),
    }
    let tampered = std::fs::read_to_string(&json)
        .unwrap()
        .replace("\"x0\": 1.0", "\"x0\": 2.0");
    std::fs::write(&json, tampered).unwrap();
    assert!(read_report(&json).is_err());
}

#[test]
fn spec_commands_need_a_config() {
    let out = run(&["simulate", "--x0", "1", "--v0", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
