//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_cavity-eigen");

const SWEEP: &str = r#"{
  "ensemble": {"single_degree": 3, "coupling": {"binary": {"delta": 0.9, "j": 1.0}}},
  "sizes": [64, 128],
  "replicates": 6,
  "seed": 11,
  "method": "oracle",
  "grid": {"param": "delta", "values": [0.5, 0.7, 0.9]}
}"#;

fn run(args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn sweep_manifest_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP);
    let mut manifests = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        run(&["sweep", "--config", &config, "--threads", threads, "--out", out.to_str().unwrap()]);
        manifests.push(fs::read(out.join("manifest.json")).unwrap());
        let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 2);
    }
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn generated_instance_feeds_oracle_and_cavity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP);
    let out = dir.path().to_str().unwrap();
    run(&["generate", "--config", &config, "--n", "50", "--out", out]);
    let instance = dir.path().join("instance.txt");
    assert!(instance.exists());
    run(&["oracle", "--instance", instance.to_str().unwrap(), "--out", out, "--seed", "2"]);
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    let lambda = record["lambda"].as_f64().unwrap();
    assert!(lambda > 0.0 && lambda <= 3.0 + 1e-12);
    assert_eq!(record["n"].as_u64(), Some(50));
    run(&["cavity", "--instance", instance.to_str().unwrap(), "--out", out]);
    let messages = fs::read_to_string(dir.path().join("messages.csv")).unwrap();
    assert_eq!(messages.lines().next(), Some("i,j,A,H"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "cavity");
}

#[test]
fn tree_check_reports_exact_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run(&["tree-check", "--n", "30", "--replicates", "4", "--seed", "5", "--out", out]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("tree_check.json")).unwrap()).unwrap();
    assert!(report["max_error"].as_f64().unwrap() < 1e-6);
    assert!(report["min_cosine"].as_f64().unwrap() > 1.0 - 1e-8);
}

#[test]
fn analytic_sweep_writes_closed_form_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SWEEP.replace("\"oracle\"", "\"analytic\""));
    run(&["sweep", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    let records: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
    let first = &records[0];
    assert!((first["mean_lambda"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(first["stderr_lambda"].as_f64(), Some(0.0));
}

#[test]
fn missing_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["sweep", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}
