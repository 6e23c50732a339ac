//! Experiment orchestration: configuration, grid runs over datasets,
//! classifiers, codecs and seeds, and report emission.

pub mod config;
pub mod evaluate;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, OutputConfig, OutputFormat, SweepConfig};
pub use experiments::{
    run_audit, run_experiment1, run_experiment2, run_experiment3, run_mlp_sweep, AuditReport, Parts, SweepAxis,
};
pub use report::emit_report;
