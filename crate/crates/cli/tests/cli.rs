use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn cdspack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdspack")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn gen_writes_edge_list() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("p.txt");
    let o = cdspack(&["gen", "--kind", "petersen", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("10 15"));
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn spectrum_of_petersen() {
    let o = cdspack(&["spectrum", "--kind", "petersen"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let lambda = v["lambda_for_params"].as_f64().unwrap();
    assert!((lambda - 2.0).abs() < 1e-3, "{lambda}");
}

#[test]
fn spectrum_rejects_irregular_input() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("path.txt");
    std::fs::write(&g, "3 2\n0 1\n1 2\n").unwrap();
    let o = cdspack(&["spectrum", "--input", g.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn pack_then_verify_round_trip() {
    let dir = tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let report = dir.path().join("r.json");
    let check = dir.path().join("v.json");
    let o = cdspack(&["gen", "--n", "2000", "--d", "64", "--seed", "3", "--output", graph.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = cdspack(&["pack", "--input", graph.to_str().unwrap(), "--seed", "1", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&report);
    assert!(r["verification"]["verified_count"].as_u64().unwrap() >= 4);

    let o = cdspack(&[
        "verify",
        "--input",
        graph.to_str().unwrap(),
        "--packing",
        report.to_str().unwrap(),
        "--report",
        check.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&check)["failures"].as_array().unwrap().len(), 0);

    // A bare packing file is accepted too, and a tampered one is rejected.
    let mut packing = r["packing"].clone();
    let bare = dir.path().join("bare.json");
    std::fs::write(&bare, packing.to_string()).unwrap();
    assert_eq!(code(&cdspack(&["verify", "--input", graph.to_str().unwrap(), "--packing", bare.to_str().unwrap()])), 0);
    let first = packing["sets"][0][0].clone();
    packing["sets"][1].as_array_mut().unwrap().push(first);
    std::fs::write(&bare, packing.to_string()).unwrap();
    assert_eq!(code(&cdspack(&["verify", "--input", graph.to_str().unwrap(), "--packing", bare.to_str().unwrap()])), 1);
}

#[test]
fn pack_unreachable_target_exits_one() {
    let o = cdspack(&["pack", "--n", "2000", "--d", "64", "--seed", "3", "--target", "500"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verification"]["target_met"], Value::Bool(false));
}

#[test]
fn pack_theory_mode_exits_at_params() {
    let o = cdspack(&["pack", "--n", "600", "--d", "20", "--mode", "theory"]);
    assert_eq!(code(&o), 5);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["error"]["stage"], "params");
}

#[test]
fn pack_trials_reports_each_run() {
    let o = cdspack(&["pack", "--n", "2000", "--d", "64", "--seed", "3", "--trials", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trials"].as_array().unwrap().len(), 3);
    assert_eq!(v["summary"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&cdspack(&["pack", "--kind", "binomial", "--n", "10"])), 2);
    assert_eq!(code(&cdspack(&["gen", "--n", "7", "--d", "3"])), 2);
    assert_eq!(code(&cdspack(&["bogus"])), 2);
    assert_eq!(code(&cdspack(&["spectrum", "--input", "/nonexistent/graph.txt"])), 3);
}
