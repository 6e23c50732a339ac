//! End-to-end harness behaviour on small synthetic datasets.

use footprint::classifiers::ClassifierSpec;
use footprint::data::manifest::{DatasetManifest, SyntheticPreset};
use footprint::harness::config::ExperimentConfig;
use footprint::harness::experiments::{run_audit, CellKey, Parts};
use footprint::metrics::Metric;
use footprint::obfuscate::CodecKind;

fn config(preset: SyntheticPreset, n: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_datasets(vec![DatasetManifest::synthetic("d", preset, n, 0)]);
    c.classifiers = vec![
        ClassifierSpec::decision_tree(),
        ClassifierSpec::knn(),
        ClassifierSpec::logistic_regression(),
    ];
    c.seeds = vec![0, 1, 2];
    c.sweep.enabled = false;
    c
}

#[test]
fn probe_rows_are_half_the_training_partition() {
    let r = run_audit(&config(SyntheticPreset::Balanced, 500), Parts { vulnerability: true, ..Parts::default() }).unwrap();
    for cell in &r.cells {
        let e = cell.evaluation.as_ref().unwrap();
        let test = e.test_perf.n_evaluated;
        // Per-class 4:1 rounding keeps the test side within a row per class of 100.
        assert!((96..=104).contains(&test), "{test}");
        assert_eq!(e.train_perf.n_evaluated, (500 - test) / 2);
        assert_eq!(e.metric, Metric::Accuracy);
    }
}

#[test]
fn imbalanced_binary_data_is_scored_by_average_precision() {
    let r = run_audit(&config(SyntheticPreset::ImbalancedShifted, 600), Parts { vulnerability: true, ..Parts::default() }).unwrap();
    assert!(r.cells.iter().all(|c| c.evaluation.as_ref().unwrap().metric == Metric::AveragePrecision));
    let m = r.vulnerability.unwrap();
    let tree = m.summary("d", "decision_tree").unwrap();
    let logistic = m.summary("d", "logistic_regression").unwrap();
    assert!(tree.mean_vul.unwrap() > logistic.mean_vul.unwrap());
}

#[test]
fn identity_codec_rows_are_exact_baselines() {
    let r = run_audit(&config(SyntheticPreset::ImbalancedShifted, 400), Parts { vulnerability: true, obfuscation: true, sweep: false }).unwrap();
    let o = r.obfuscation.unwrap();
    for row in o.rows.iter().filter(|r| r.codec == CodecKind::None) {
        assert_eq!(row.mean_vul_change, Some(0.0));
        assert_eq!(row.mean_pp_tradeoff, Some(1.0));
    }
    for row in &o.rows {
        assert_eq!(row.per_seed.len(), 3);
        assert!(row.per_seed.iter().all(|s| s.record.is_consistent()));
    }
}

#[test]
fn every_configured_tuple_appears_exactly_once() {
    let c = config(SyntheticPreset::Balanced, 300);
    let r = run_audit(&c, Parts { vulnerability: true, obfuscation: true, sweep: false }).unwrap();
    let mut keys: Vec<&CellKey> = r.cells.iter().map(|c| &c.key).collect();
    assert_eq!(keys.len(), 3 * 3 * 3);
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 27);
}

#[test]
fn config_files_resolve_relative_csv_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,b,label\n");
    for i in 0..60 {
        let y = i % 2;
        csv.push_str(&format!("{},{},{}\n", i as f64 * 0.1 + y as f64, (i * 7 % 11) as f64, y));
    }
    std::fs::write(dir.path().join("toy.csv"), csv).unwrap();
    let text = r#"{
        "datasets": [{"name": "toy", "source": "csv", "path": "toy.csv", "label_column": "label"}],
        "classifiers": [{"name": "nb", "family": "gaussian_nb"}],
        "seeds": [3],
        "sweep": {"enabled": false}
    }"#;
    let path = dir.path().join("c.json");
    std::fs::write(&path, text).unwrap();
    let c = ExperimentConfig::from_file(&path).unwrap();
    let r = run_audit(&c, Parts { vulnerability: true, ..Parts::default() }).unwrap();
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert!(r.vulnerability.unwrap().summary("toy", "nb").unwrap().mean_vul.is_some());
}
