use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn footprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_footprint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("json summary")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = r#"{
        "datasets": [{"name": "imb", "source": "synthetic", "preset": "imbalanced_shifted", "n": 300}],
        "classifiers": [
            {"name": "decision_tree", "family": "decision_tree"},
            {"name": "nb", "family": "gaussian_nb"}
        ],
        "seeds": [0, 1],
        "sweep": {"enabled": false}
    }"#;
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn audit_writes_tables_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = footprint(&["obfuscate-audit", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let summary = json(&o.stdout);
        assert_eq!(summary["status"], "ok");
        assert_eq!(summary["cells"], 12);
    }
    for name in ["vulnerability_matrix.csv", "vul_change.csv", "tradeoff.csv", "report.json", "vulnerability_heatmap.svg"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let matrix = std::fs::read_to_string(a.join("vulnerability_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().next(), Some("dataset,decision_tree,nb"));
}

#[test]
fn report_re_emits_from_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let first = dir.path().join("first");
    let o = footprint(&["audit", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    assert!(!first.join("vulnerability_matrix.csv").exists());
    let second = dir.path().join("second");
    let bundle = first.join("report.json");
    let o = footprint(&["report", "--from", bundle.to_str().unwrap(), "--out", second.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(second.join("vulnerability_matrix.csv").exists());
}

#[test]
fn verify_shift_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = footprint(&["verify-shift", "--trials", "100", "--seed", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o.stdout);
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["cases"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("shift_report.json").exists());
}

#[test]
fn verify_shift_replays_an_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    let text = r#"{"case": "prior", "train": [[0.36, 0.04], [0.54, 0.06]], "test": [[0.2, 0.2], [0.3, 0.3]],
                   "loss": [[0, 1], [1, 0]], "classifier": [0, 1]}"#;
    std::fs::write(&path, text).unwrap();
    let o = footprint(&["verify-shift", "--instance", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o.stdout);
    assert!(summary["instance"]["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn errors_exit_nonzero_with_a_json_summary() {
    let o = footprint(&["audit", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
    let summary = json(&o.stderr);
    assert_eq!(summary["status"], "error");
    assert_eq!(summary["command"], "audit");
    assert!(summary["error"].as_str().unwrap().contains("nonexistent"));

    let o = footprint(&["audit", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let o = footprint(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json(&o.stderr)["error"].as_str().unwrap().contains("sweep"));
}
