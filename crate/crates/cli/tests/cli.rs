use std::path::Path;
use std::process::{Command, Output};

fn halfmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfmap")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn check<'a>(report: &'a serde_json::Value, name: &str) -> &'a serde_json::Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

#[test]
fn verify_kernel_modes_8() {
    let out = halfmap(&["verify-kernel", "--modes", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["passed"], true);
    assert_eq!(report["data"]["dimension"], 3);
    assert_eq!(report["config"]["seed"], 0);
}

#[test]
fn verify_kernel_modes_2_is_usage_error() {
    let out = halfmap(&["verify-kernel", "--modes", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("band limit 2"));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(halfmap(&["verify-kernel", "--degree", "2"]).status.code(), Some(2));
    assert_eq!(halfmap(&["minimize", "--tol", "abc"]).status.code(), Some(2));
    assert_eq!(halfmap(&["verify-bubble", "--theta", "1"]).status.code(), Some(2));
}

#[test]
fn threshold_sweep_agrees() {
    let dims: Vec<_> = ["1e-2", "1e-10"]
        .iter()
        .map(|t| json(&halfmap(&["verify-kernel", "--modes", "8", "--zero-threshold", t]))["data"]["dimension"].clone())
        .collect();
    assert_eq!(dims[0], 3);
    assert_eq!(dims[0], dims[1]);
}

#[test]
fn verify_bubble_degree_2_seed_7() {
    let out = halfmap(&["verify-bubble", "--degree", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert!(check(&report, "bubble.energy_spectral")["measured"].as_f64().unwrap() <= 1e-6);
    assert_eq!(check(&report, "bubble.el_residual")["pass"], true);
}

#[test]
fn verify_bubble_explicit_components() {
    let out = halfmap(&["verify-bubble", "--components", "2:-0.3,0.5:1", "--theta", "0.7", "--conjugate"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["data"]["degree"], -2);
}

#[test]
fn minimize_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.csv");
    let trace_path = dir.path().join("trace.csv");
    let out = halfmap(&[
        "minimize",
        "--degree",
        "1",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("PASS minimize.mobius_fit"));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("name,measured,tolerance,comparison,margin,pass\n"));
    assert!(csv.contains("minimize.energy,"));
    assert!(std::fs::read_to_string(&trace_path).unwrap().starts_with("iteration,energy,gradient_norm"));
}

#[test]
fn failing_run_exits_one() {
    let out = halfmap(&["minimize", "--max-iters", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

fn body(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["wall_time_s"] = serde_json::json!(0.0);
    v["config"]["output"] = serde_json::Value::Null;
    v
}

#[test]
fn replay_reproduces_report_body() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let config = dir.path().join("config.json");
    let out = halfmap(&["minimize", "--degree", "2", "--seed", "5", "--out", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    std::fs::write(&config, report["config"].to_string()).unwrap();
    let out = halfmap(&["replay", config.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(body(&first), body(&second));
}
