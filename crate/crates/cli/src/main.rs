//! `footprint` command-line entry point.
//!
//! Every command prints one JSON summary on stdout. Failures print a JSON
//! error object on stderr and exit nonzero: 1 for errors, 2 for usage
//! errors, 3 when a verification ran but did not pass.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use footprint::harness::experiments::VulnSummary;
use footprint::harness::{self, AuditReport, ExperimentConfig, OutputFormat, Parts};
use footprint::shiftlab::{self, ShiftInstance};
use serde_json::{json, Value};

const EXIT_ERROR: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "footprint", version, about = "Audit classifiers for training-data footprints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vulnerability of every classifier on every dataset.
    Audit(RunArgs),
    /// MLP vulnerability against depth and width.
    Sweep(RunArgs),
    /// Vulnerability change under the LSH and Hamming codecs.
    ObfuscateAudit(RunArgs),
    /// Privacy-performance trade-off under each codec.
    Tradeoff(RunArgs),
    /// Check the prior, covariate and concept shift risk-gap decompositions.
    VerifyShift(ShiftArgs),
    /// Run everything, or re-emit tables from an existing report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON). Defaults to both synthetic presets
    /// and Optdigits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, overriding the configuration.
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    format: Vec<OutputFormat>,
    /// Vulnerability threshold, overriding the configuration.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct ShiftArgs {
    /// Random instances per shift case.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate one instance file instead of the randomized check.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Directory for the full JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Existing report bundle to re-emit instead of running.
    #[arg(long)]
    from: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: footprint::Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Error(String),
    CheckFailed(Value),
}

impl From<footprint::Error> for Failure {
    fn from(e: footprint::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default_suite(),
    };
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    if !args.format.is_empty() {
        config.output.formats = args.format.clone();
    }
    if let Some(t) = args.threshold {
        config.threshold = t;
    }
    config.validate()?;
    Ok(config)
}

fn paths(files: &[PathBuf]) -> Vec<String> {
    files.iter().map(|p| p.display().to_string()).collect()
}

fn vulnerable(summaries: &[VulnSummary]) -> Vec<Value> {
    summaries
        .iter()
        .filter(|s| s.flagged_vulnerable)
        .map(|s| json!({"dataset": s.dataset, "classifier": s.classifier, "mean_vul": s.mean_vul}))
        .collect()
}

fn summarize(command: &str, report: &AuditReport, files: &[PathBuf]) -> Value {
    let mut summary = json!({
        "status": "ok",
        "command": command,
        "cells": report.cells.len(),
        "errors": report.errors.len(),
        "files": paths(files),
    });
    if let Some(m) = &report.vulnerability {
        summary["vulnerable"] = Value::Array(vulnerable(&m.summaries));
    }
    if let Some(o) = &report.obfuscation {
        let admissible: Vec<Value> = o
            .rows
            .iter()
            .filter(|r| r.mean_pp_tradeoff.is_some_and(|p| p >= o.baseline))
            .map(|r| json!({"dataset": r.dataset, "classifier": r.classifier, "codec": r.codec, "pp_tradeoff": r.mean_pp_tradeoff}))
            .collect();
        summary["admissible_tradeoffs"] = Value::Array(admissible);
    }
    if let Some(s) = &report.sweep {
        let curves: Vec<Value> = s
            .curves
            .iter()
            .map(|c| json!({"dataset": c.dataset, "axis": c.axis, "spearman": c.spearman}))
            .collect();
        summary["sweep"] = Value::Array(curves);
    }
    summary
}

fn run_parts(command: &str, args: &RunArgs, parts: Parts) -> Result<Value, Failure> {
    let config = load_config(args)?;
    let report = harness::run_audit(&config, parts)?;
    let files = harness::emit_report(&report, &config.output.dir, &config.output.formats)?;
    Ok(summarize(command, &report, &files))
}

fn verify_shift(args: &ShiftArgs) -> Result<Value, Failure> {
    if let Some(path) = &args.instance {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
        let result = ShiftInstance::from_json(&text)?.evaluate()?;
        let summary = json!({"status": "ok", "command": "verify-shift", "instance": result});
        return if result.residual <= shiftlab::RESIDUAL_TOLERANCE {
            Ok(summary)
        } else {
            Err(Failure::CheckFailed(summary))
        };
    }
    let report = shiftlab::verify_prop1(args.trials, args.seed)?;
    let mut files = Vec::new();
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Error(format!("{}: {e}", dir.display())))?;
        let path = dir.join("shift_report.json");
        let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Error(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
        files.push(path);
    }
    let cases: Vec<Value> = report
        .cases
        .iter()
        .map(|c| {
            json!({
                "case": c.case,
                "matches": c.matches,
                "trials": c.trials,
                "max_residual": c.max_residual,
                "non_degenerate_nonzero": format!("{}/{}", c.non_degenerate_nonzero, c.non_degenerate),
                "degenerate_exact_zero": format!("{}/{}", c.degenerate_exact_zero, c.degenerate_trials),
                "empirical_within": format!("{}/{}", c.empirical_within, c.empirical_trials),
                "test_risk_at_least_train": c.test_risk_at_least_train,
                "passed": c.passed(),
            })
        })
        .collect();
    let summary = json!({
        "status": if report.passed { "ok" } else { "failed" },
        "command": "verify-shift",
        "passed": report.passed,
        "worst_residual": report.worst_residual,
        "cases": cases,
        "files": paths(&files),
    });
    if report.passed {
        Ok(summary)
    } else {
        Err(Failure::CheckFailed(summary))
    }
}

fn re_emit(from: &Path, args: &RunArgs) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(from).map_err(|e| Failure::Error(format!("{}: {e}", from.display())))?;
    let report: AuditReport = serde_json::from_str(&text).map_err(|e| Failure::Error(e.to_string()))?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("footprint-out"));
    let formats = if args.format.is_empty() {
        vec![OutputFormat::Csv, OutputFormat::Svg]
    } else {
        args.format.clone()
    };
    let files = harness::emit_report(&report, &dir, &formats)?;
    Ok(summarize("report", &report, &files))
}

fn run(command: &Command) -> Result<Value, Failure> {
    let only = |vulnerability, obfuscation, sweep| Parts {
        vulnerability,
        obfuscation,
        sweep,
    };
    match command {
        Command::Audit(a) => run_parts("audit", a, only(true, false, false)),
        Command::Sweep(a) => run_parts("sweep", a, only(false, false, true)),
        Command::ObfuscateAudit(a) => run_parts("obfuscate-audit", a, only(true, true, false)),
        Command::Tradeoff(a) => run_parts("tradeoff", a, only(false, true, false)),
        Command::VerifyShift(a) => verify_shift(a),
        Command::Report(r) => match &r.from {
            Some(from) => re_emit(from, &r.run),
            None => {
                let config = load_config(&r.run)?;
                let parts = Parts {
                    sweep: config.sweep.enabled,
                    ..Parts::ALL
                };
                run_parts("report", &r.run, parts)
            }
        },
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Audit(_) => "audit",
        Command::Sweep(_) => "sweep",
        Command::ObfuscateAudit(_) => "obfuscate-audit",
        Command::Tradeoff(_) => "tradeoff",
        Command::VerifyShift(_) => "verify-shift",
        Command::Report(_) => "report",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(Failure::CheckFailed(summary)) => {
            eprintln!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(Failure::Error(message)) => {
            let summary = json!({"status": "error", "command": command_name(&cli.command), "error": message});
            eprintln!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::from(EXIT_ERROR)
        }
    }
}
