//! UCI Optdigits (optical recognition of handwritten digits).
//!
//! The full dataset is two files, `optdigits.tra` (3823 rows) and
//! `optdigits.tes` (1797 rows), each with 64 integer features in 0..=16
//! followed by the digit label. The test partition ships with the crate;
//! the full set can be fetched with [`fetch`] when the network allows.

use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

use super::{read_csv, Dataset, LabelColumn, LoadOptions};
use crate::error::{Error, Result};

pub const BASE_URL: &str = "https://archive.ics.uci.edu/ml/machine-learning-databases/optdigits/";
pub const TRAIN_FILE: &str = "optdigits.tra";
pub const TEST_FILE: &str = "optdigits.tes";
pub const N_FEATURES: usize = 64;
pub const FULL_POINTS: usize = 5620;

const BUNDLED_TEST: &str = include_str!("../../data/optdigits.tes");
pub const BUNDLED_TEST_SHA256: &str = "6ebb3d2fee246a4e99363262ddf8a00a3c41bee6014c373ed9d9216ba7f651b8";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse(bytes: &[u8], name: &str) -> Result<Dataset> {
    let opts = LoadOptions::new(LabelColumn::Index(N_FEATURES), false);
    let d = read_csv(bytes, name, &opts)?;
    if d.n_features() != N_FEATURES || d.n_classes() != 10 {
        return Err(Error::InvalidDataset(format!(
            "{name}: expected 64 features and 10 classes, got {} and {}",
            d.n_features(),
            d.n_classes()
        )));
    }
    Ok(d)
}

/// The 1797-row test partition bundled with the crate.
pub fn bundled_test_partition() -> Result<Dataset> {
    let actual = sha256_hex(BUNDLED_TEST.as_bytes());
    if actual != BUNDLED_TEST_SHA256 {
        return Err(Error::Checksum {
            path: PathBuf::from(TEST_FILE),
            expected: BUNDLED_TEST_SHA256.into(),
            actual,
        });
    }
    parse(BUNDLED_TEST.as_bytes(), "optdigits")
}

/// Expected SHA-256 digests for the two UCI files.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Checksums {
    pub train: Option<String>,
    pub test: Option<String>,
}

fn read_verified(path: &Path, expected: Option<&str>) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(expected) = expected {
        let actual = sha256_hex(&bytes);
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(Error::Checksum {
                path: path.to_path_buf(),
                expected: expected.into(),
                actual,
            });
        }
    }
    Ok(bytes)
}

/// Loads and concatenates both partitions found in `dir` (5620 points).
pub fn load_dir(dir: &Path, checksums: &Checksums) -> Result<Dataset> {
    let mut text = read_verified(&dir.join(TRAIN_FILE), checksums.train.as_deref())?;
    if !text.ends_with(b"\n") {
        text.push(b'\n');
    }
    text.extend(read_verified(&dir.join(TEST_FILE), checksums.test.as_deref())?);
    parse(&text, "optdigits")
}

/// True when both UCI files are present in `dir`.
pub fn is_available(dir: &Path) -> bool {
    dir.join(TRAIN_FILE).is_file() && dir.join(TEST_FILE).is_file()
}

/// Downloads the two UCI files into `dir` with the system `curl`, then
/// verifies them against `checksums`.
pub fn fetch(dir: &Path, checksums: &Checksums) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for file in [TRAIN_FILE, TEST_FILE] {
        let target = dir.join(file);
        if target.is_file() {
            continue;
        }
        let status = Command::new("curl")
            .args(["-fsSL", "--max-time", "60", "-o"])
            .arg(&target)
            .arg(format!("{BASE_URL}{file}"))
            .status()
            .map_err(|e| Error::io(&target, e))?;
        if !status.success() {
            let _ = std::fs::remove_file(&target);
            return Err(Error::io(
                &target,
                std::io::Error::other(format!("download of {BASE_URL}{file} failed ({status})")),
            ));
        }
    }
    load_dir(dir, checksums).map(|_| ())
}
