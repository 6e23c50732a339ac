//! One audit cell: fit a classifier on a split (optionally through a codec)
//! and measure probe and test performance.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierSpec, FitDiagnostics, TrainedModel};
use crate::data::{Dataset, FeatureKind, Split, Standardizer};
use crate::error::Result;
use crate::metrics::{self, Metric, PerfValue, VulnRecord};
use crate::obfuscate::{Codec, CodecKind};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metric: Metric,
    /// Performance on the probe subsample of the training partition.
    pub train_perf: PerfValue,
    pub test_perf: PerfValue,
    pub vul: f64,
    pub diagnostics: FitDiagnostics,
}

impl Evaluation {
    pub fn record(&self, dataset: &str, classifier: &str, threshold: f64) -> Result<VulnRecord> {
        VulnRecord::new(dataset, classifier, self.train_perf, self.test_perf, threshold)
    }
}

/// The class scored by average precision: the rarer training class, the
/// higher id on ties.
pub fn positive_class(train: &Dataset) -> usize {
    let counts = train.class_counts();
    (0..counts.len()).rev().min_by_key(|&c| counts[c]).unwrap_or(0)
}

pub fn performance(model: &TrainedModel, data: &Dataset, metric: Metric, positive: usize) -> Result<PerfValue> {
    let features = data.features().view();
    match metric {
        Metric::Accuracy => metrics::accuracy(&model.predict(features)?, data.labels()),
        Metric::AveragePrecision => {
            let scores = model.predict_scores(features)?;
            let truth: Vec<bool> = data.labels().iter().map(|&y| y == positive).collect();
            metrics::average_precision(&scores.column(positive).to_vec(), &truth)
        }
    }
}

/// Train, probe and test views of a split in the representation a model sees.
pub struct Prepared {
    pub train: Dataset,
    pub probe: Dataset,
    pub test: Dataset,
}

/// Codes replace the features (as 0/1 columns exempt from scaling);
/// otherwise distance- and gradient-based families get z-scored features
/// fitted on the training partition.
pub fn prepare(
    spec: &ClassifierSpec,
    split: &Split,
    codec: CodecKind,
    n_planes: Option<usize>,
    codec_seed: u64,
) -> Result<Prepared> {
    let probe = split.probe_set();
    let rebuild = |d: &Dataset, f: Array2<f64>, kinds: &[FeatureKind]| d.with_features(f, kinds.to_vec());
    if let Some(fitted) = Codec::fit(codec, split.train.features().view(), n_planes, codec_seed)? {
        let encode = |d: &Dataset| -> Result<Dataset> {
            let bits = fitted.encode(d.features().view())?.to_features();
            let kinds = vec![FeatureKind::Categorical; bits.ncols()];
            rebuild(d, bits, &kinds)
        };
        return Ok(Prepared {
            train: encode(&split.train)?,
            probe: encode(&probe)?,
            test: encode(&split.test)?,
        });
    }
    if spec.family.wants_standardized() {
        let scaler = Standardizer::fit(split.train.features(), split.train.feature_kinds());
        let scale = |d: &Dataset| -> Result<Dataset> {
            rebuild(d, scaler.transform(d.features())?, d.feature_kinds())
        };
        return Ok(Prepared {
            train: scale(&split.train)?,
            probe: scale(&probe)?,
            test: scale(&split.test)?,
        });
    }
    Ok(Prepared {
        train: split.train.clone(),
        probe,
        test: split.test.clone(),
    })
}

/// Codec and model seeds derive from the run seed (plus the codec kind and
/// the classifier's own seed), so identical configurations under different
/// names give identical results.
pub fn evaluate(
    spec: &ClassifierSpec,
    split: &Split,
    codec: CodecKind,
    n_planes: Option<usize>,
    metric: Metric,
    run_seed: u64,
) -> Result<Evaluation> {
    let codec_seed = seed::derive_tag(run_seed, codec.name());
    let prepared = prepare(spec, split, codec, n_planes, codec_seed)?;
    let model_spec = spec
        .clone()
        .with_seed(seed::derive(seed::derive_tag(run_seed, "model"), spec.seed));
    let model = classifiers::fit(&model_spec, &prepared.train)?;
    let positive = positive_class(&split.train);
    let train_perf = performance(&model, &prepared.probe, metric, positive)?;
    let test_perf = performance(&model, &prepared.test, metric, positive)?;
    Ok(Evaluation {
        metric,
        vul: metrics::vulnerability(&train_perf, &test_perf)?,
        train_perf,
        test_perf,
        diagnostics: *model.diagnostics(),
    })
}
