//! Datasets: ingestion, validation, standardization, stratified splitting
//! and synthetic generators with controlled distribution shift.

mod csv_load;
pub mod manifest;
pub mod optdigits;
pub mod shift;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use csv_load::{load_csv, read_csv, CategoricalEncoding, LabelColumn, LoadOptions};
pub use shift::{gen_shifted, ConceptRule, GaussianClass, SelectionBias, ShiftKind, ShiftSpec, ShiftedPair};

/// Fraction of each class assigned to the test partition (4:1 split).
pub const TEST_FRACTION: f64 = 0.2;
/// Fraction of the training partition used as the membership probe.
pub const PROBE_FRACTION: f64 = 0.5;
/// Smallest class size `split` accepts.
pub const MIN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// A labelled feature matrix.
///
/// Construction through [`Dataset::new`] enforces that every value is
/// finite, every label lies in `0..n_classes` and every class occurs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Vec<usize>,
    feature_kinds: Vec<FeatureKind>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_kinds: Vec<FeatureKind>,
        n_classes: usize,
    ) -> Result<Self> {
        let (rows, cols) = features.dim();
        if rows == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if labels.len() != rows {
            return Err(Error::LengthMismatch {
                left: rows,
                right: labels.len(),
            });
        }
        if feature_kinds.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: feature_kinds.len(),
            });
        }
        if n_classes == 0 {
            return Err(Error::InvalidDataset("n_classes must be positive".into()));
        }
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteCell {
                row: idx / cols.max(1),
                column: idx % cols.max(1),
            });
        }
        let mut counts = vec![0usize; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::InvalidDataset(format!(
                    "label {y} outside 0..{n_classes}"
                )));
            }
            counts[y] += 1;
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidDataset(format!("class {missing} has no members")));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            feature_kinds,
            n_classes,
        })
    }

    /// Dataset with all columns numeric and `n_classes` inferred from the labels.
    pub fn numeric(name: impl Into<String>, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let kinds = vec![FeatureKind::Numeric; features.ncols()];
        Dataset::new(name, features, labels, kinds, n_classes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_points(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Majority-class count over minority-class count.
    pub fn imbalance_ratio(&self) -> f64 {
        let counts = self.class_counts();
        let max = counts.iter().copied().max().unwrap_or(0);
        let min = counts.iter().copied().min().unwrap_or(0);
        max as f64 / min as f64
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows at `indices`, in the given order. Classes absent from the
    /// subset keep their ids, so the result is not revalidated for coverage.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_kinds: self.feature_kinds.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Same labels, replaced feature matrix (e.g. an obfuscated encoding).
    pub fn with_features(&self, features: Array2<f64>, kinds: Vec<FeatureKind>) -> Result<Dataset> {
        if features.nrows() != self.n_points() {
            return Err(Error::LengthMismatch {
                left: self.n_points(),
                right: features.nrows(),
            });
        }
        if kinds.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: kinds.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("replacement features are not finite".into()));
        }
        Ok(Dataset {
            name: self.name.clone(),
            features,
            labels: self.labels.clone(),
            feature_kinds: kinds,
            n_classes: self.n_classes,
        })
    }
}

/// Per-column statistics used by [`Standardizer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    /// Zero-variance (or categorical) column, passed through unchanged.
    pub passthrough: bool,
}

const ZERO_VARIANCE: f64 = 1e-12;

/// Per-feature z-scoring fitted on one matrix and applicable to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    columns: Vec<ColumnStats>,
}

impl Standardizer {
    /// Fits population mean/stddev per numeric column. Categorical and
    /// zero-variance columns are flagged as pass-through.
    pub fn fit(features: &Array2<f64>, kinds: &[FeatureKind]) -> Standardizer {
        let n = features.nrows() as f64;
        let columns = features
            .axis_iter(Axis(1))
            .zip(kinds)
            .map(|(col, kind)| {
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                ColumnStats {
                    mean,
                    std,
                    passthrough: *kind == FeatureKind::Categorical || std < ZERO_VARIANCE,
                }
            })
            .collect();
        Standardizer { columns }
    }

    pub fn columns(&self) -> &[ColumnStats] {
        &self.columns
    }

    pub fn transform(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for (mut col, stats) in out.axis_iter_mut(Axis(1)).zip(&self.columns) {
            if !stats.passthrough {
                col.mapv_inplace(|v| (v - stats.mean) / stats.std);
            }
        }
        Ok(out)
    }
}

/// Standardizes `d` with its own statistics.
pub fn standardize(d: &Dataset) -> Result<(Dataset, Standardizer)> {
    if d.n_points() < 2 {
        return Err(Error::Precondition(
            "standardize needs at least two points".into(),
        ));
    }
    let scaler = Standardizer::fit(d.features(), d.feature_kinds());
    let features = scaler.transform(d.features())?;
    let out = d.with_features(features, d.feature_kinds().to_vec())?;
    Ok((out, scaler))
}

/// Stratified 4:1 train/test partition plus the training probe subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Row indices into `train` forming the probe subsample (sorted).
    pub probe: Vec<usize>,
    /// Source row index of each train row.
    pub train_index: Vec<usize>,
    /// Source row index of each test row.
    pub test_index: Vec<usize>,
    pub seed: u64,
}

impl Split {
    pub fn probe_set(&self) -> Dataset {
        self.train.select(&self.probe)
    }
}

/// Number of a class's `count` members assigned to the test partition.
fn test_share(count: usize) -> usize {
    let share = (count as f64 * TEST_FRACTION).round() as usize;
    share.clamp(1, count - 1)
}

pub fn split(d: &Dataset, seed: u64) -> Result<Split> {
    let counts = d.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < MIN_CLASS_SIZE) {
        return Err(Error::ClassTooSmall {
            class,
            count,
            required: MIN_CLASS_SIZE,
        });
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &y) in d.labels().iter().enumerate() {
        per_class[y].push(i);
    }
    let mut rng = seed::rng(seed::derive_tag(seed, "split"));
    let mut train_index = Vec::with_capacity(d.n_points());
    let mut test_index = Vec::new();
    for members in per_class.iter_mut() {
        members.shuffle(&mut rng);
        let k = test_share(members.len());
        test_index.extend_from_slice(&members[..k]);
        train_index.extend_from_slice(&members[k..]);
    }
    train_index.sort_unstable();
    test_index.sort_unstable();

    let n_probe = (PROBE_FRACTION * train_index.len() as f64).floor() as usize;
    let mut probe_rng = seed::rng(seed::derive_tag(seed, "probe"));
    let mut probe = rand::seq::index::sample(&mut probe_rng, train_index.len(), n_probe).into_vec();
    probe.sort_unstable();

    Ok(Split {
        train: d.select(&train_index),
        test: d.select(&test_index),
        probe,
        train_index,
        test_index,
        seed,
    })
}
