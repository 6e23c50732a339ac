//! Writes an [`AuditReport`] as CSV tables, a JSON bundle and an SVG
//! heatmap. Floats use the shortest round-trip representation, so identical
//! reports give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::OutputFormat;
use super::experiments::{AuditReport, ObfuscationReport, SweepReport, VulnMatrix};
use crate::error::{Error, Result};

pub const MATRIX_CSV: &str = "vulnerability_matrix.csv";
pub const CELLS_CSV: &str = "vulnerability_cells.csv";
pub const VUL_CHANGE_CSV: &str = "vul_change.csv";
pub const TRADEOFF_CSV: &str = "tradeoff.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_CORRELATION_CSV: &str = "sweep_correlation.csv";
pub const REPORT_JSON: &str = "report.json";
pub const HEATMAP_SVG: &str = "vulnerability_heatmap.svg";
pub const ERRORS_JSON: &str = "errors.json";

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every table the report holds in each requested format and returns
/// the written paths in order.
pub fn emit_report(report: &AuditReport, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    if formats.contains(&OutputFormat::Csv) {
        if let Some(m) = &report.vulnerability {
            write_matrix_csv(m, &out(MATRIX_CSV))?;
            write_cells_csv(m, &out(CELLS_CSV))?;
        }
        if let Some(o) = &report.obfuscation {
            write_vul_change_csv(o, &out(VUL_CHANGE_CSV))?;
            write_tradeoff_csv(o, &out(TRADEOFF_CSV))?;
        }
        if let Some(s) = &report.sweep {
            write_sweep_csv(s, &out(SWEEP_CSV), &out(SWEEP_CORRELATION_CSV))?;
        }
    }
    if formats.contains(&OutputFormat::Json) {
        write_text(&out(REPORT_JSON), &serde_json::to_string_pretty(report)?)?;
    }
    if formats.contains(&OutputFormat::Svg) {
        if let Some(m) = &report.vulnerability {
            write_text(&out(HEATMAP_SVG), &heatmap_svg(m))?;
        }
    }
    if !report.errors.is_empty() {
        write_text(&out(ERRORS_JSON), &serde_json::to_string_pretty(&report.errors)?)?;
    }
    Ok(written)
}

/// One row per dataset, one column per classifier, mean vulnerability;
/// cells without a successful seed are empty.
fn write_matrix_csv(m: &VulnMatrix, path: &Path) -> Result<()> {
    let mut header = vec!["dataset"];
    header.extend(m.classifiers.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = m
        .datasets
        .iter()
        .map(|d| {
            std::iter::once(d.clone())
                .chain(m.classifiers.iter().map(|c| num(m.summary(d, c).and_then(|s| s.mean_vul))))
                .collect()
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn write_cells_csv(m: &VulnMatrix, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = m
        .records
        .iter()
        .map(|(seed, r)| {
            vec![
                r.dataset.clone(),
                r.classifier.clone(),
                seed.to_string(),
                r.train_perf.metric.name().to_string(),
                r.train_perf.value.to_string(),
                r.test_perf.value.to_string(),
                r.vul.to_string(),
                r.flagged_vulnerable.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["dataset", "classifier", "seed", "metric", "train_perf", "test_perf", "vul", "vulnerable"],
        &rows,
    )
}

fn write_vul_change_csv(o: &ObfuscationReport, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = o
        .rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.classifier.clone(),
                r.codec.name().to_string(),
                num(r.mean_vul),
                num(r.mean_vul_obf),
                num(r.mean_vul_change),
                num(r.std_vul_change),
                r.vulnerable.to_string(),
                r.per_seed.len().to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "dataset",
            "classifier",
            "codec",
            "vul",
            "vul_obf",
            "vul_change",
            "vul_change_std",
            "vulnerable",
            "n_seeds",
        ],
        &rows,
    )
}

fn write_tradeoff_csv(o: &ObfuscationReport, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = o
        .rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.classifier.clone(),
                r.codec.name().to_string(),
                num(r.mean_perf),
                num(r.mean_perf_obf),
                num(r.mean_pp_tradeoff),
                num(r.std_pp_tradeoff),
                o.baseline.to_string(),
                r.mean_pp_tradeoff.map(|p| (p >= o.baseline).to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "dataset",
            "classifier",
            "codec",
            "perf",
            "perf_obf",
            "pp_tradeoff",
            "pp_tradeoff_std",
            "baseline",
            "admissible",
        ],
        &rows,
    )
}

fn write_sweep_csv(s: &SweepReport, points_path: &Path, correlation_path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for c in &s.curves {
        for p in &c.points {
            rows.push(vec![
                c.dataset.clone(),
                c.axis.name().to_string(),
                p.value.to_string(),
                p.classifier.clone(),
                num(p.mean_vul),
                num(p.std_vul),
                p.vul.len().to_string(),
            ]);
        }
    }
    write_csv(
        points_path,
        &["dataset", "axis", "value", "classifier", "mean_vul", "std_vul", "n_seeds"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = s
        .curves
        .iter()
        .map(|c| {
            vec![
                c.dataset.clone(),
                c.axis.name().to_string(),
                c.points.len().to_string(),
                c.spearman.map_or_else(|| "undefined".to_string(), |r| r.to_string()),
            ]
        })
        .collect();
    write_csv(correlation_path, &["dataset", "axis", "points", "spearman"], &rows)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// White at 1, saturating red at 2; blue below 1.
fn heat_colour(vul: f64) -> String {
    let t = (vul - 1.0).clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("#ff{0:02x}{0:02x}", fade(t))
    } else {
        format!("#{0:02x}{0:02x}ff", fade(t))
    }
}

fn heatmap_svg(m: &VulnMatrix) -> String {
    const CELL_W: usize = 84;
    const CELL_H: usize = 28;
    const LEFT: usize = 150;
    const TOP: usize = 110;
    let width = LEFT + CELL_W * m.classifiers.len() + 10;
    let height = TOP + CELL_H * m.datasets.len() + 30;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="16" font-size="13">Mean vulnerability (flagged at {} or above, outlined)</text>"#,
        m.threshold
    );
    for (j, c) in m.classifiers.iter().enumerate() {
        let x = LEFT + j * CELL_W + CELL_W / 2;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" transform="rotate(-40 {x} {})">{}</text>"#,
            TOP - 6,
            TOP - 6,
            escape(c)
        );
    }
    for (i, d) in m.datasets.iter().enumerate() {
        let y = TOP + i * CELL_H;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6,
            y + CELL_H / 2 + 4,
            escape(d)
        );
        for (j, c) in m.classifiers.iter().enumerate() {
            let x = LEFT + j * CELL_W;
            let summary = m.summary(d, c);
            let (fill, label) = match summary.and_then(|s| s.mean_vul) {
                Some(v) => (heat_colour(v), format!("{v:.2}")),
                None => ("#dddddd".to_string(), "n/a".to_string()),
            };
            let stroke = if summary.is_some_and(|s| s.flagged_vulnerable) {
                r#" stroke="black" stroke-width="2""#
            } else {
                r#" stroke="white""#
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}"{stroke}/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
                x + CELL_W / 2,
                y + CELL_H / 2 + 4
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
