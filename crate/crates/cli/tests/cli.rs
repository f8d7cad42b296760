use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn adapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adapt")).args(args).output().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_hamiltonian_exits_nonzero_with_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = adapt(&["run", "--hamiltonian", "no/such/file.json", "--output", s(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no/such/file.json"), "{err}");
}

#[test]
fn h2_run_reports_fewer_evaluations_when_recycling() {
    let dir = tempfile::tempdir().unwrap();
    let h2 = fixture("h2_sto3g_0p7414.json");
    let out = adapt(&["run", "--hamiltonian", s(&h2), "--verify", "--output", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["feval_ratio"].as_f64().unwrap() < 1.0);
}

#[test]
fn zero_iterations_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = adapt(&[
        "run",
        "--model",
        "tfim",
        "--n-qubits",
        "4",
        "--max-adapt-iterations",
        "0",
        "--modes",
        "canonical",
        "--output",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("adapt_trace_canonical.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn model_and_input_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tfim.json");
    let out = adapt(&[
        "model", "--model", "tfim", "--n-qubits", "6", "--coupling", "1", "--field", "0.5", "--output", s(&path),
    ]);
    assert!(out.status.success());
    let bundled = fs::read_to_string(fixture("tfim_n6_j1_h0p5.json")).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), bundled);
    let out = adapt(&["model", "--input", s(&path)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), bundled);
}

#[test]
fn pool_export_schema() {
    let out = adapt(&["pool", "--n-qubits", "4", "--n-electrons", "2", "--qe-singles", "off"]);
    assert!(out.status.success());
    let pool: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = pool.as_array().unwrap();
    // Spin-conserving doubles on 4 qubits: 0,1->2,3 and 0,3->1,2.
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["label"], "double 0,1->2,3");
    let term = &entries[0]["terms"][0];
    assert!(entries[0]["label"].is_string());
    assert!(term["pauli"].is_string() && term["re"].is_f64() && term["im"].is_f64());
}

#[test]
fn diagnose_replays_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let h2 = fixture("h2_sto3g_0p7414.json");
    assert!(adapt(&["run", "--hamiltonian", s(&h2), "--output", s(dir.path())]).status.success());
    let out = adapt(&["diagnose", s(dir.path()), "--heatmap-iterations", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["hessdist_H2.csv", "hm_canonical_1.csv", "hm_recycling_1.csv", "ledger_diagnostics.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn diagnose_rejects_a_non_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!adapt(&["diagnose", s(dir.path())]).status.success());
}
