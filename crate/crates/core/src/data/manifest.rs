//! JSON dataset manifests: where a dataset comes from and which metric
//! scores it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{gen_shifted, load_csv, optdigits, CategoricalEncoding, Dataset, LabelColumn, LoadOptions, ShiftSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticPreset {
    /// Two classes, imbalance ratio 8.55, prior + covariate shift.
    ImbalancedShifted,
    /// Four equiprobable classes, no shift.
    Balanced,
}

impl SyntheticPreset {
    /// Only the training side of the generated pair is used; the test side
    /// is kept small and drawn from an independent stream.
    pub fn spec(self, n: usize, seed: u64) -> ShiftSpec {
        const N_TEST: usize = 64;
        match self {
            SyntheticPreset::ImbalancedShifted => ShiftSpec::imbalanced_shifted(n, N_TEST, seed),
            SyntheticPreset::Balanced => ShiftSpec::balanced(n, N_TEST, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
        #[serde(default = "default_true")]
        has_header: bool,
        #[serde(default)]
        categorical: CategoricalEncoding,
    },
    Synthetic {
        preset: SyntheticPreset,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    /// UCI Optdigits. Without `dir` (or when the files are missing there)
    /// the bundled 1797-row partition is used.
    Optdigits {
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        checksums: optdigits::Checksums,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default)]
    pub metric: MetricChoice,
}

impl DatasetManifest {
    pub fn synthetic(name: &str, preset: SyntheticPreset, n: usize, seed: u64) -> Self {
        DatasetManifest {
            name: name.into(),
            source: DatasetSource::Synthetic { preset, n, seed },
            metric: MetricChoice::Auto,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Materializes the dataset; relative CSV paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        self.load_for_run(base_dir, 0)
    }

    /// Like [`load`](Self::load), but synthetic data is regenerated per run
    /// with generator seed `seed + run_seed`; file-backed data ignores the run.
    pub fn load_for_run(&self, base_dir: &Path, run_seed: u64) -> Result<Dataset> {
        let d = match &self.source {
            DatasetSource::Csv {
                path,
                label_column,
                has_header,
                categorical,
            } => {
                let opts = LoadOptions {
                    label_column: label_column.clone(),
                    has_header: *has_header,
                    categorical: *categorical,
                };
                load_csv(base_dir.join(path), &opts)?
            }
            DatasetSource::Synthetic { preset, n, seed } => {
                gen_shifted(&preset.spec(*n, seed.wrapping_add(run_seed)))?.train
            }
            DatasetSource::Optdigits { dir, checksums } => match dir {
                Some(dir) if optdigits::is_available(&base_dir.join(dir)) => {
                    optdigits::load_dir(&base_dir.join(dir), checksums)?
                }
                _ => optdigits::bundled_test_partition()?,
            },
        };
        Ok(d.with_name(self.name.clone()))
    }
}
