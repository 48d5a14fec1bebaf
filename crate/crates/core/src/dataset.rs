//! CSV ingestion for logistic-regression datasets.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::LogisticRegressionTarget;

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    /// The last column; resolved once the column count is known.
    fn default() -> Self {
        LabelColumn::Name(String::new())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScaling {
    /// Inputs are used exactly as read.
    #[default]
    None,
    /// Divide every feature by 255 (grey-scale pixel data).
    Pixel255,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default)]
    pub add_bias: bool,
    #[serde(default)]
    pub scaling: FeatureScaling,
}

/// Loads a comma-separated dataset into a logistic-regression target.
///
/// A first row containing any non-numeric field is treated as a header. Labels
/// must take at most two distinct numeric values: `{0, 1}` is kept as is, any
/// other pair maps its smaller value to 0 and its larger to 1. Features are not
/// standardized.
pub fn load_csv_dataset(path: &Path, opts: &CsvOptions) -> Result<LogisticRegressionTarget> {
    let (header, rows) = read_numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    };
    let width = header.as_ref().map_or(first.len(), Vec::len);
    if width < 2 {
        return Err(Error::Validation(
            "need at least one feature column and one label column".into(),
        ));
    }
    for (line, row) in &rows {
        if row.len() != width {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: *line,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
    }

    let label_idx = match &opts.label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Validation(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        LabelColumn::Name(name) if name.is_empty() => width - 1,
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Validation(format!("no column named {name:?}")))?,
    };

    let raw_labels: Vec<f64> = rows.iter().map(|(_, r)| r[label_idx]).collect();
    let labels = binarize_labels(&raw_labels)?;

    let features = width - 1 + usize::from(opts.add_bias);
    let scale = match opts.scaling {
        FeatureScaling::None => 1.0,
        FeatureScaling::Pixel255 => 1.0 / 255.0,
    };
    let mut inputs = DMatrix::zeros(rows.len(), features);
    for (i, (_, row)) in rows.iter().enumerate() {
        let mut j = 0;
        for (k, v) in row.iter().enumerate() {
            if k != label_idx {
                inputs[(i, j)] = v * scale;
                j += 1;
            }
        }
        if opts.add_bias {
            inputs[(i, features - 1)] = 1.0;
        }
    }
    LogisticRegressionTarget::new(inputs, labels)
}

type Rows = Vec<(u64, Vec<f64>)>;

/// Reads all numeric rows with their line numbers; a non-numeric first row is
/// returned as the header.
fn read_numeric_rows(path: &Path) -> Result<(Option<Vec<String>>, Rows)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, &e))?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(_) if i == 0 => header = Some(record.iter().map(str::to_owned).collect()),
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("non-numeric field: {e}"),
                })
            }
        }
    }
    Ok((header, rows))
}

/// Loads a purely numeric CSV (optional header) as an `N × d` matrix, e.g. a
/// stored chain with one draw per row.
pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let (header, rows) = read_numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    };
    let width = header.as_ref().map_or(first.len(), Vec::len);
    for (line, row) in &rows {
        if row.len() != width {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: *line,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i].1[j]))
}

fn binarize_labels(raw: &[f64]) -> Result<Vec<u8>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !v.is_finite() {
            return Err(Error::Validation(format!("non-finite label {v}")));
        }
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return Err(Error::Validation(format!(
                    "labels are not binary: saw {:?}",
                    distinct
                )));
            }
        }
    }
    distinct.sort_by(f64::total_cmp);
    let already_binary = distinct.iter().all(|&v| v == 0.0 || v == 1.0);
    Ok(raw
        .iter()
        .map(|&v| {
            if already_binary {
                v as u8
            } else {
                u8::from(distinct.len() == 2 && v == distinct[1])
            }
        })
        .collect())
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        ));
    }
    Error::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    }
}
