//! Training-data footprint auditing: vulnerability measurement, feature
//! obfuscation codecs, and exact risk-gap analysis under distribution shift.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod obfuscate;
pub mod seed;
pub mod shiftlab;
pub mod stats;

pub use error::{Error, Result};
