//! JSON experiment configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierSpec, DEEP_WIDTHS};
use crate::data::manifest::{DatasetManifest, DatasetSource, SyntheticPreset};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_VULNERABILITY_THRESHOLD;
use crate::obfuscate::CodecKind;

/// Rows per synthetic dataset in the default suite.
pub const DEFAULT_SYNTHETIC_ROWS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetManifest>,
    #[serde(default = "ClassifierSpec::default_grid")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "default_codecs")]
    pub codecs: Vec<CodecKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Hyperplanes per LSH code; `None` uses the feature count.
    #[serde(default)]
    pub lsh_planes: Option<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub enabled: bool,
    /// Widths of a single hidden layer.
    pub neurons: Vec<usize>,
    /// Depths; depth `d` uses the first `d` deep-schedule widths.
    pub layers: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            enabled: true,
            neurons: vec![4, 8, 16, 32, 64, 128],
            layers: (1..=DEEP_WIDTHS.len()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::InvalidSpec(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("footprint-out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
        }
    }
}

fn default_codecs() -> Vec<CodecKind> {
    vec![CodecKind::None, CodecKind::Lsh, CodecKind::Hamming]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_threshold() -> f64 {
    DEFAULT_VULNERABILITY_THRESHOLD
}

impl ExperimentConfig {
    /// Both synthetic presets and Optdigits with every default.
    pub fn default_suite() -> Self {
        ExperimentConfig::for_datasets(vec![
            DatasetManifest::synthetic(
                "imbalanced_shifted",
                SyntheticPreset::ImbalancedShifted,
                DEFAULT_SYNTHETIC_ROWS,
                0,
            ),
            DatasetManifest::synthetic("balanced", SyntheticPreset::Balanced, DEFAULT_SYNTHETIC_ROWS, 0),
            DatasetManifest {
                name: "optdigits".into(),
                source: DatasetSource::Optdigits {
                    dir: None,
                    checksums: Default::default(),
                },
                metric: Default::default(),
            },
        ])
    }

    pub fn for_datasets(datasets: Vec<DatasetManifest>) -> Self {
        ExperimentConfig {
            datasets,
            classifiers: ClassifierSpec::default_grid(),
            codecs: default_codecs(),
            seeds: default_seeds(),
            threshold: default_threshold(),
            lsh_planes: None,
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig = serde_json::from_str(text)?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    /// Relative paths inside the file resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        ExperimentConfig::from_json(&text, base)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidSpec(m));
        if self.datasets.is_empty() {
            return invalid("at least one dataset is required".into());
        }
        if self.classifiers.is_empty() {
            return invalid("at least one classifier is required".into());
        }
        if self.seeds.is_empty() {
            return invalid("at least one seed is required".into());
        }
        if self.codecs.is_empty() {
            return invalid("at least one codec is required".into());
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::NonPositive {
                name: "threshold",
                value: self.threshold,
            });
        }
        if self.lsh_planes == Some(0) {
            return invalid("lsh_planes must be positive".into());
        }
        let mut names = HashSet::new();
        if let Some(d) = self.datasets.iter().find(|d| !names.insert(d.name.as_str())) {
            return invalid(format!("duplicate dataset name {:?}", d.name));
        }
        let mut names = HashSet::new();
        if let Some(c) = self.classifiers.iter().find(|c| !names.insert(c.name.as_str())) {
            return invalid(format!("duplicate classifier name {:?}", c.name));
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        if unique_count(&self.seeds) != self.seeds.len() {
            return invalid("duplicate seed".into());
        }
        if unique_count(&self.codecs) != self.codecs.len() {
            return invalid("duplicate codec".into());
        }
        if self.sweep.enabled {
            if self.sweep.neurons.is_empty() || self.sweep.layers.is_empty() {
                return invalid("sweep ranges must be nonempty when the sweep is enabled".into());
            }
            if self.sweep.neurons.contains(&0) {
                return invalid("sweep neuron counts must be positive".into());
            }
            if let Some(l) = self.sweep.layers.iter().find(|&&l| l == 0 || l > DEEP_WIDTHS.len()) {
                return invalid(format!("sweep depth {l} outside 1..={}", DEEP_WIDTHS.len()));
            }
        }
        Ok(())
    }
}

fn unique_count<T: std::hash::Hash + Eq>(items: &[T]) -> usize {
    items.iter().collect::<HashSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_quick_config_is_valid() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json");
        let c = ExperimentConfig::from_file(&path).unwrap();
        c.validate().unwrap();
        assert_eq!(c.datasets.len(), 2);
        assert!(!c.sweep.enabled);
    }

    #[test]
    fn defaults_fill_a_minimal_file() {
        let text = r#"{"datasets": [{"name": "b", "source": "synthetic", "preset": "balanced", "n": 500}]}"#;
        let c = ExperimentConfig::from_json(text, Path::new("/tmp")).unwrap();
        assert_eq!(c.classifiers.len(), 10);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.threshold, 1.4);
        assert_eq!(c.sweep.layers, (1..=8).collect::<Vec<_>>());
        assert_eq!(c.base_dir, Path::new("/tmp"));
    }

    #[test]
    fn default_suite_round_trips() {
        let c = ExperimentConfig::default_suite();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json().unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ExperimentConfig::default_suite();
        let mut c = base.clone();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.classifiers.push(ClassifierSpec::knn());
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sweep.layers = vec![9];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sweep.neurons.clear();
        assert!(c.validate().is_err());
        c.sweep.enabled = false;
        c.validate().unwrap();
        let mut c = base;
        c.threshold = -1.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"datasets": [], "bogus": 1}"#, Path::new(".")).is_err());
    }
}
