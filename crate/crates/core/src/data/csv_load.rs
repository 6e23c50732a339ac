use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalEncoding {
    /// One integer code per category (sorted category order).
    #[default]
    Ordinal,
    /// One 0/1 column per category.
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub label_column: LabelColumn,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub categorical: CategoricalEncoding,
}

fn default_true() -> bool {
    true
}

impl LoadOptions {
    pub fn new(label_column: LabelColumn, has_header: bool) -> Self {
        LoadOptions {
            label_column,
            has_header,
            categorical: CategoricalEncoding::Ordinal,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, opts)
}

enum Column {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<usize>, levels: usize },
}

/// Parses a CSV stream. Rows and columns in error messages are 1-based
/// data rows (header excluded) and 0-based column indices.
pub fn read_csv<R: Read>(reader: R, name: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Option<Vec<String>> = if opts.has_header {
        Some(rdr.headers()?.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{name}: no data rows")));
    }
    let width = rows[0].len();
    let label_idx = match &opts.label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(Error::MissingLabelColumn(i.to_string())),
        LabelColumn::Name(n) => headers
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == n))
            .ok_or_else(|| Error::MissingLabelColumn(n.clone()))?,
    };

    let labels_raw: Vec<&str> = rows.iter().map(|r| r[label_idx].as_str()).collect();
    let (labels, n_classes) = encode_labels(&labels_raw);
    if n_classes < 2 {
        return Err(Error::SingleClass);
    }

    let mut columns = Vec::new();
    for col in (0..width).filter(|&c| c != label_idx) {
        columns.push(parse_column(&rows, col)?);
    }

    let mut kinds = Vec::new();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for column in columns {
        match column {
            Column::Numeric(values) => {
                kinds.push(FeatureKind::Numeric);
                blocks.push(values);
            }
            Column::Categorical { codes, levels } => match opts.categorical {
                CategoricalEncoding::Ordinal => {
                    kinds.push(FeatureKind::Categorical);
                    blocks.push(codes.iter().map(|&c| c as f64).collect());
                }
                CategoricalEncoding::OneHot => {
                    for level in 0..levels {
                        kinds.push(FeatureKind::Categorical);
                        blocks.push(codes.iter().map(|&c| f64::from(u8::from(c == level))).collect());
                    }
                }
            },
        }
    }
    let n = rows.len();
    let features = Array2::from_shape_fn((n, blocks.len()), |(i, j)| blocks[j][i]);
    Dataset::new(name, features, labels, kinds, n_classes)
}

/// Dense ids in sorted order: numeric order when every label parses as a
/// number, lexicographic otherwise.
fn encode_labels(raw: &[&str]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<&str> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut order: Vec<usize> = (0..distinct.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        distinct = order.into_iter().map(|i| distinct[i]).collect();
    }
    let ids = raw
        .iter()
        .map(|s| distinct.iter().position(|d| d == s).expect("label present"))
        .collect();
    (ids, distinct.len())
}

fn parse_column(rows: &[Vec<String>], col: usize) -> Result<Column> {
    let parsed: Vec<Option<f64>> = rows.iter().map(|r| r[col].parse::<f64>().ok()).collect();
    let n_numeric = parsed.iter().filter(|p| p.is_some()).count();
    if n_numeric > 0 {
        let mut values = Vec::with_capacity(rows.len());
        for (i, p) in parsed.into_iter().enumerate() {
            match p {
                Some(v) if v.is_finite() => values.push(v),
                Some(_) => return Err(Error::NonFiniteCell { row: i + 1, column: col }),
                None => {
                    return Err(Error::UnparseableCell {
                        row: i + 1,
                        column: col,
                        value: rows[i][col].clone(),
                    })
                }
            }
        }
        return Ok(Column::Numeric(values));
    }
    if let Some(i) = rows.iter().position(|r| r[col].is_empty()) {
        return Err(Error::UnparseableCell {
            row: i + 1,
            column: col,
            value: String::new(),
        });
    }
    let levels: Vec<&str> = rows
        .iter()
        .map(|r| r[col].as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let codes = rows
        .iter()
        .map(|r| levels.iter().position(|l| *l == r[col]).expect("level present"))
        .collect();
    Ok(Column::Categorical {
        codes,
        levels: levels.len(),
    })
}
