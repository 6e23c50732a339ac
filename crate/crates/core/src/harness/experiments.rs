//! Grid runs: every (dataset, classifier, codec, seed) cell evaluated once,
//! then summarized into vulnerability, obfuscation and sweep tables.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::evaluate::{evaluate, Evaluation};
use crate::classifiers::{ClassifierSpec, Family, DEEP_WIDTHS};
use crate::data::{self, Split};
use crate::error::{Error, Result};
use crate::metrics::{classify_vulnerable, Metric, TradeoffRecord, VulnRecord};
use crate::obfuscate::CodecKind;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub classifier: String,
    pub codec: CodecKind,
    pub seed: u64,
}

/// One evaluated cell; exactly one of `evaluation` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub key: CellKey,
    pub evaluation: Option<Evaluation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Parts {
    pub vulnerability: bool,
    pub obfuscation: bool,
    pub sweep: bool,
}

impl Parts {
    pub const ALL: Parts = Parts {
        vulnerability: true,
        obfuscation: true,
        sweep: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnSummary {
    pub dataset: String,
    pub classifier: String,
    pub metric: Option<Metric>,
    /// Seeds whose cell succeeded, aligned with `vul`.
    pub seeds: Vec<u64>,
    pub vul: Vec<f64>,
    pub mean_vul: Option<f64>,
    pub std_vul: Option<f64>,
    pub mean_train_perf: Option<f64>,
    pub mean_test_perf: Option<f64>,
    /// Mean vulnerability at or above the threshold.
    pub flagged_vulnerable: bool,
    pub n_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnMatrix {
    pub datasets: Vec<String>,
    pub classifiers: Vec<String>,
    pub threshold: f64,
    pub records: Vec<(u64, VulnRecord)>,
    pub summaries: Vec<VulnSummary>,
}

impl VulnMatrix {
    pub fn summary(&self, dataset: &str, classifier: &str) -> Option<&VulnSummary> {
        self.summaries
            .iter()
            .find(|s| s.dataset == dataset && s.classifier == classifier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTradeoff {
    pub seed: u64,
    pub record: TradeoffRecord,
}

/// One (dataset, classifier, codec) row of the vul-change and trade-off
/// tables. Raw means are over seeds; `mean_vul_change` and
/// `mean_pp_tradeoff` average the per-seed derived values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationRow {
    pub dataset: String,
    pub classifier: String,
    pub codec: CodecKind,
    pub per_seed: Vec<SeedTradeoff>,
    pub mean_vul: Option<f64>,
    pub mean_vul_obf: Option<f64>,
    pub mean_perf: Option<f64>,
    pub mean_perf_obf: Option<f64>,
    pub mean_vul_change: Option<f64>,
    pub std_vul_change: Option<f64>,
    pub mean_pp_tradeoff: Option<f64>,
    pub std_pp_tradeoff: Option<f64>,
    /// The plain classifier is vulnerable on this dataset.
    pub vulnerable: bool,
    pub n_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationReport {
    pub threshold: f64,
    /// Trade-off values are read against this baseline.
    pub baseline: f64,
    pub rows: Vec<ObfuscationRow>,
}

impl ObfuscationReport {
    pub fn row(&self, dataset: &str, classifier: &str, codec: CodecKind) -> Option<&ObfuscationRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.classifier == classifier && r.codec == codec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Layers,
    Neurons,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Layers => "layers",
            SweepAxis::Neurons => "neurons",
        }
    }

    pub fn hidden(self, value: usize) -> Vec<usize> {
        match self {
            SweepAxis::Layers => DEEP_WIDTHS[..value].to_vec(),
            SweepAxis::Neurons => vec![value],
        }
    }

    pub fn classifier_name(self, value: usize) -> String {
        format!("mlp_{}_{value}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub classifier: String,
    pub vul: Vec<f64>,
    pub mean_vul: Option<f64>,
    pub std_vul: Option<f64>,
    pub n_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub dataset: String,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Rank correlation of mean vulnerability with the swept value; `None`
    /// when undefined (fewer than two points or a constant curve).
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub curves: Vec<SweepCurve>,
}

impl SweepReport {
    pub fn curve(&self, dataset: &str, axis: SweepAxis) -> Option<&SweepCurve> {
        self.curves.iter().find(|c| c.dataset == dataset && c.axis == axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub key: CellKey,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seeds: Vec<u64>,
    pub threshold: f64,
    /// Every evaluated cell in deterministic order.
    pub cells: Vec<Cell>,
    pub vulnerability: Option<VulnMatrix>,
    pub obfuscation: Option<ObfuscationReport>,
    pub sweep: Option<SweepReport>,
    pub errors: Vec<CellError>,
}

impl AuditReport {
    pub fn cell(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.iter().find(|c| &c.key == key)
    }
}

struct Job {
    dataset: usize,
    spec: ClassifierSpec,
    codec: CodecKind,
    seed: u64,
}

struct Prepared {
    split: Split,
    metric: Metric,
}

/// Loads and splits every (dataset, seed) once; plain and encoded cells of
/// the same pair share the split.
fn prepare_splits(config: &ExperimentConfig) -> HashMap<(usize, u64), std::result::Result<Prepared, String>> {
    let pairs: Vec<(usize, u64)> = (0..config.datasets.len())
        .flat_map(|d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(d, s)| {
            let manifest = &config.datasets[d];
            let prepared = manifest
                .load_for_run(&config.base_dir, s)
                .and_then(|data| {
                    let metric = manifest.metric.resolve(&data);
                    Ok(Prepared {
                        split: data::split(&data, s)?,
                        metric,
                    })
                })
                .map_err(|e| format!("dataset {}: {e}", manifest.name));
            ((d, s), prepared)
        })
        .collect()
}

/// Cells with identical data, codec, seed and model configuration are
/// evaluated once, whatever their names.
fn fingerprint(job: &Job) -> String {
    let family = serde_json::to_string(&job.spec.family).expect("specs serialize");
    format!("{}|{}|{}|{}|{family}", job.dataset, job.seed, job.codec.name(), job.spec.seed)
}

fn run_jobs(config: &ExperimentConfig, jobs: &[Job]) -> Vec<Cell> {
    let splits = prepare_splits(config);
    let mut unique: Vec<usize> = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let slots: Vec<usize> = jobs
        .iter()
        .enumerate()
        .map(|(i, job)| {
            *index_of.entry(fingerprint(job)).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    let outcomes: Vec<std::result::Result<Evaluation, String>> = unique
        .par_iter()
        .map(|&i| {
            let job = &jobs[i];
            let prepared = splits[&(job.dataset, job.seed)].as_ref().map_err(Clone::clone)?;
            evaluate(
                &job.spec,
                &prepared.split,
                job.codec,
                config.lsh_planes,
                prepared.metric,
                job.seed,
            )
            .map_err(|e| e.to_string())
        })
        .collect();
    jobs.iter()
        .zip(slots)
        .map(|(job, slot)| {
            let (evaluation, error) = match &outcomes[slot] {
                Ok(e) => (Some(e.clone()), None),
                Err(m) => (None, Some(m.clone())),
            };
            Cell {
                key: CellKey {
                    dataset: config.datasets[job.dataset].name.clone(),
                    classifier: job.spec.name.clone(),
                    codec: job.codec,
                    seed: job.seed,
                },
                evaluation,
                error,
            }
        })
        .collect()
}

fn sweep_base(config: &ExperimentConfig) -> Result<ClassifierSpec> {
    config
        .classifiers
        .iter()
        .find(|c| matches!(c.family, Family::Mlp(_)))
        .cloned()
        .ok_or_else(|| Error::Precondition("the sweep needs an MLP in the classifier grid".into()))
}

fn sweep_spec(base: &ClassifierSpec, axis: SweepAxis, value: usize) -> ClassifierSpec {
    let mut spec = base.clone();
    spec.name = axis.classifier_name(value);
    if let Family::Mlp(p) = &mut spec.family {
        p.hidden = axis.hidden(value);
    }
    spec
}

fn sweep_axes(config: &ExperimentConfig) -> [(SweepAxis, &[usize]); 2] {
    [
        (SweepAxis::Layers, &config.sweep.layers),
        (SweepAxis::Neurons, &config.sweep.neurons),
    ]
}

/// Runs the requested parts over one shared set of cells.
pub fn run_audit(config: &ExperimentConfig, parts: Parts) -> Result<AuditReport> {
    config.validate()?;
    let obfuscation_codecs: Vec<CodecKind> = config.codecs.iter().copied().filter(|c| *c != CodecKind::None).collect();
    if parts.obfuscation && obfuscation_codecs.is_empty() {
        return Err(Error::Precondition("obfuscation needs the lsh or hamming codec".into()));
    }
    let sweep_base = if parts.sweep {
        if !config.sweep.enabled {
            return Err(Error::Precondition("the sweep is disabled in the configuration".into()));
        }
        Some(sweep_base(config)?)
    } else {
        None
    };

    let mut codecs = Vec::new();
    if parts.vulnerability || parts.obfuscation {
        codecs.push(CodecKind::None);
    }
    if parts.obfuscation {
        codecs.extend(obfuscation_codecs);
    }
    let mut jobs = Vec::new();
    for dataset in 0..config.datasets.len() {
        for spec in &config.classifiers {
            for &codec in &codecs {
                for &seed in &config.seeds {
                    jobs.push(Job {
                        dataset,
                        spec: spec.clone(),
                        codec,
                        seed,
                    });
                }
            }
        }
        if let Some(base) = &sweep_base {
            for (axis, values) in sweep_axes(config) {
                for &value in values {
                    for &seed in &config.seeds {
                        jobs.push(Job {
                            dataset,
                            spec: sweep_spec(base, axis, value),
                            codec: CodecKind::None,
                            seed,
                        });
                    }
                }
            }
        }
    }
    let mut cells = run_jobs(config, &jobs);
    // Sweep and grid cells may coincide by name; keep the first.
    let mut seen = std::collections::HashSet::new();
    cells.retain(|c| seen.insert(c.key.clone()));

    let lookup: HashMap<&CellKey, &Cell> = cells.iter().map(|c| (&c.key, c)).collect();
    let vulnerability = parts.vulnerability.then(|| vulnerability_matrix(config, &lookup));
    let obfuscation = parts.obfuscation.then(|| obfuscation_report(config, &lookup));
    let sweep = parts.sweep.then(|| sweep_report(config, &lookup));
    let errors = cells
        .iter()
        .filter_map(|c| {
            c.error.as_ref().map(|m| CellError {
                key: c.key.clone(),
                message: m.clone(),
            })
        })
        .collect();
    Ok(AuditReport {
        seeds: config.seeds.clone(),
        threshold: config.threshold,
        cells,
        vulnerability,
        obfuscation,
        sweep,
        errors,
    })
}

pub fn run_experiment1(config: &ExperimentConfig) -> Result<AuditReport> {
    run_audit(
        config,
        Parts {
            vulnerability: true,
            ..Parts::default()
        },
    )
}

pub fn run_experiment2(config: &ExperimentConfig) -> Result<AuditReport> {
    run_audit(
        config,
        Parts {
            vulnerability: true,
            obfuscation: true,
            sweep: false,
        },
    )
}

/// The trade-off tables come from the same cells as the vul-change tables.
pub fn run_experiment3(config: &ExperimentConfig) -> Result<AuditReport> {
    run_experiment2(config)
}

pub fn run_mlp_sweep(config: &ExperimentConfig) -> Result<AuditReport> {
    run_audit(
        config,
        Parts {
            sweep: true,
            ..Parts::default()
        },
    )
}

fn key(dataset: &str, classifier: &str, codec: CodecKind, seed: u64) -> CellKey {
    CellKey {
        dataset: dataset.into(),
        classifier: classifier.into(),
        codec,
        seed,
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        (None, None)
    } else {
        (Some(stats::mean(xs)), Some(stats::std_dev(xs)))
    }
}

fn vulnerability_matrix(config: &ExperimentConfig, cells: &HashMap<&CellKey, &Cell>) -> VulnMatrix {
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for manifest in &config.datasets {
        for spec in &config.classifiers {
            let mut seeds = Vec::new();
            let mut evals = Vec::new();
            let mut n_errors = 0;
            for &seed in &config.seeds {
                let cell = cells[&key(&manifest.name, &spec.name, CodecKind::None, seed)];
                match &cell.evaluation {
                    Some(e) => {
                        if let Ok(r) = e.record(&manifest.name, &spec.name, config.threshold) {
                            records.push((seed, r));
                        }
                        seeds.push(seed);
                        evals.push(e);
                    }
                    None => n_errors += 1,
                }
            }
            let vul: Vec<f64> = evals.iter().map(|e| e.vul).collect();
            let (mean_vul, std_vul) = mean_std(&vul);
            let train: Vec<f64> = evals.iter().map(|e| e.train_perf.value).collect();
            let test: Vec<f64> = evals.iter().map(|e| e.test_perf.value).collect();
            summaries.push(VulnSummary {
                dataset: manifest.name.clone(),
                classifier: spec.name.clone(),
                metric: evals.first().map(|e| e.metric),
                seeds,
                flagged_vulnerable: mean_vul.is_some_and(|v| classify_vulnerable(v, config.threshold)),
                mean_vul,
                std_vul,
                mean_train_perf: mean_std(&train).0,
                mean_test_perf: mean_std(&test).0,
                vul,
                n_errors,
            });
        }
    }
    VulnMatrix {
        datasets: config.datasets.iter().map(|d| d.name.clone()).collect(),
        classifiers: config.classifiers.iter().map(|c| c.name.clone()).collect(),
        threshold: config.threshold,
        records,
        summaries,
    }
}

fn obfuscation_report(config: &ExperimentConfig, cells: &HashMap<&CellKey, &Cell>) -> ObfuscationReport {
    let mut rows = Vec::new();
    for manifest in &config.datasets {
        for spec in &config.classifiers {
            let plain: Vec<Option<&Evaluation>> = config
                .seeds
                .iter()
                .map(|&s| cells[&key(&manifest.name, &spec.name, CodecKind::None, s)].evaluation.as_ref())
                .collect();
            let plain_vul: Vec<f64> = plain.iter().flatten().map(|e| e.vul).collect();
            let vulnerable = mean_std(&plain_vul).0.is_some_and(|v| classify_vulnerable(v, config.threshold));
            for &codec in &config.codecs {
                let mut per_seed = Vec::new();
                let mut n_errors = 0;
                for (&seed, base) in config.seeds.iter().zip(&plain) {
                    let obf = cells[&key(&manifest.name, &spec.name, codec, seed)].evaluation.as_ref();
                    let record = match (base, obf) {
                        (Some(b), Some(o)) => {
                            TradeoffRecord::new(b.vul, o.vul, b.test_perf.value, o.test_perf.value).ok()
                        }
                        _ => None,
                    };
                    match record {
                        Some(record) => per_seed.push(SeedTradeoff { seed, record }),
                        None => n_errors += 1,
                    }
                }
                let col = |f: fn(&TradeoffRecord) -> f64| -> Vec<f64> { per_seed.iter().map(|s| f(&s.record)).collect() };
                let (mean_vul_change, std_vul_change) = mean_std(&col(|r| r.vul_change));
                let (mean_pp_tradeoff, std_pp_tradeoff) = mean_std(&col(|r| r.pp_tradeoff));
                rows.push(ObfuscationRow {
                    dataset: manifest.name.clone(),
                    classifier: spec.name.clone(),
                    codec,
                    mean_vul: mean_std(&col(|r| r.vul)).0,
                    mean_vul_obf: mean_std(&col(|r| r.vul_obf)).0,
                    mean_perf: mean_std(&col(|r| r.perf)).0,
                    mean_perf_obf: mean_std(&col(|r| r.perf_obf)).0,
                    mean_vul_change,
                    std_vul_change,
                    mean_pp_tradeoff,
                    std_pp_tradeoff,
                    per_seed,
                    vulnerable,
                    n_errors,
                });
            }
        }
    }
    ObfuscationReport {
        threshold: config.threshold,
        baseline: 1.0,
        rows,
    }
}

fn sweep_report(config: &ExperimentConfig, cells: &HashMap<&CellKey, &Cell>) -> SweepReport {
    let mut curves = Vec::new();
    for manifest in &config.datasets {
        for (axis, values) in sweep_axes(config) {
            let points: Vec<SweepPoint> = values
                .iter()
                .map(|&value| {
                    let classifier = axis.classifier_name(value);
                    let evals: Vec<Option<&Evaluation>> = config
                        .seeds
                        .iter()
                        .map(|&s| cells[&key(&manifest.name, &classifier, CodecKind::None, s)].evaluation.as_ref())
                        .collect();
                    let vul: Vec<f64> = evals.iter().flatten().map(|e| e.vul).collect();
                    let (mean_vul, std_vul) = mean_std(&vul);
                    SweepPoint {
                        value,
                        classifier,
                        n_errors: evals.len() - vul.len(),
                        vul,
                        mean_vul,
                        std_vul,
                    }
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter_map(|p| p.mean_vul.map(|v| (p.value as f64, v)))
                .unzip();
            curves.push(SweepCurve {
                dataset: manifest.name.clone(),
                axis,
                spearman: stats::spearman(&xs, &ys),
                points,
            });
        }
    }
    SweepReport { curves }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::{DatasetManifest, SyntheticPreset};

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::for_datasets(vec![DatasetManifest::synthetic(
            "imb",
            SyntheticPreset::ImbalancedShifted,
            400,
            0,
        )]);
        c.classifiers = vec![
            ClassifierSpec::decision_tree(),
            ClassifierSpec::gaussian_nb(),
            ClassifierSpec::mlp("tiny", vec![4]),
        ];
        c.seeds = vec![0, 1];
        c.sweep.neurons = vec![2, 4];
        c.sweep.layers = vec![1];
        c
    }

    #[test]
    fn every_configured_cell_appears_once() {
        let c = small_config();
        let r = run_audit(&c, Parts::ALL).unwrap();
        // 3 classifiers × 3 codecs × 2 seeds plus 3 sweep points × 2 seeds.
        assert_eq!(r.cells.len(), 18 + 6);
        assert!(r.errors.is_empty());
        let m = r.vulnerability.as_ref().unwrap();
        assert_eq!(m.summaries.len(), 3);
        assert_eq!(m.records.len(), 6);
        let o = r.obfuscation.as_ref().unwrap();
        assert_eq!(o.rows.len(), 9);
        for row in &o.rows {
            assert!(row.per_seed.iter().all(|s| s.record.is_consistent()));
            if row.codec == CodecKind::None {
                assert!(row.per_seed.iter().all(|s| s.record.vul_change == 0.0 && s.record.pp_tradeoff == 1.0));
            }
        }
        let s = r.sweep.as_ref().unwrap();
        let layers = s.curve("imb", SweepAxis::Layers).unwrap();
        assert_eq!(layers.points.len(), 1);
        assert_eq!(layers.spearman, None);
        assert_eq!(s.curve("imb", SweepAxis::Neurons).unwrap().points.len(), 2);
    }

    #[test]
    fn plain_and_encoded_cells_share_the_split() {
        let c = small_config();
        let r = run_experiment2(&c).unwrap();
        let plain = r.cell(&key("imb", "decision_tree", CodecKind::None, 1)).unwrap();
        let lsh = r.cell(&key("imb", "decision_tree", CodecKind::Lsh, 1)).unwrap();
        let (p, l) = (plain.evaluation.as_ref().unwrap(), lsh.evaluation.as_ref().unwrap());
        assert_eq!(p.train_perf.n_evaluated, l.train_perf.n_evaluated);
        assert_eq!(p.test_perf.n_evaluated, l.test_perf.n_evaluated);
    }

    #[test]
    fn failing_cells_are_recorded_not_fatal() {
        let mut c = small_config();
        c.datasets.push(DatasetManifest {
            name: "missing".into(),
            source: crate::data::manifest::DatasetSource::Csv {
                path: "does/not/exist.csv".into(),
                label_column: crate::data::LabelColumn::Index(0),
                has_header: true,
                categorical: Default::default(),
            },
            metric: Default::default(),
        });
        let r = run_experiment1(&c).unwrap();
        assert_eq!(r.errors.len(), 6);
        let s = r.vulnerability.as_ref().unwrap().summary("missing", "decision_tree").unwrap();
        assert_eq!(s.mean_vul, None);
        assert_eq!(s.n_errors, 2);
    }

    #[test]
    fn sweep_requires_an_mlp() {
        let mut c = small_config();
        c.classifiers.truncate(2);
        assert!(matches!(run_mlp_sweep(&c), Err(Error::Precondition(_))));
        c.codecs = vec![CodecKind::None];
        assert!(matches!(run_experiment2(&c), Err(Error::Precondition(_))));
    }
}
