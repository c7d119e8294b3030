use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Which CSV column holds the integer class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    First,
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "first" => LabelColumn::First,
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::First => f.write_str("first"),
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Loads a comma-separated file. A first row containing any non-numeric
/// cell is treated as a header. Error rows are 1-based file line numbers.
pub fn load_csv(path: &Path, label_column: &LabelColumn) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path, label_column)
}

pub(crate) fn parse_csv(text: &str, path: &Path, label_column: &LabelColumn) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::BadFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, rec));
    }

    let header = match records.first() {
        Some((_, first)) if !first.iter().all(is_numeric) => Some(
            records
                .remove(0)
                .1
                .iter()
                .map(str::to_string)
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };

    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| records.first().map(|(_, r)| r.len()))
        .unwrap_or(0);
    if width < 2 {
        return Err(Error::BadFile {
            path: path.to_path_buf(),
            message: format!("need at least 2 columns (features + label), found {width}"),
        });
    }

    let label_idx = match label_column {
        LabelColumn::First => 0,
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::InvalidConfig(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("no column named {name:?} in {}", path.display()))
            })?,
    };

    if records.len() < 2 {
        return Err(Error::BadFile {
            path: path.to_path_buf(),
            message: format!("need at least 2 data rows, found {}", records.len()),
        });
    }

    let d = width - 1;
    let n = records.len();
    let mut samples = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for (s, (line, rec)) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: *line,
                expected: width,
                found: rec.len(),
            });
        }
        let mut f = 0;
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                let label = cell.parse::<u32>().map_err(|_| Error::BadCell {
                    path: path.to_path_buf(),
                    row: *line,
                    column: c,
                    value: cell.to_string(),
                    expected: "a nonnegative integer label",
                })?;
                labels.push(label);
            } else {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::BadCell {
                        path: path.to_path_buf(),
                        row: *line,
                        column: c,
                        value: cell.to_string(),
                        expected: "a finite real",
                    })?;
                samples[(f, s)] = v;
                f += 1;
            }
        }
    }
    Dataset::from_columns(samples, labels)
}

/// Serializes features and labels (label last) with a header row. Values are
/// written in shortest round-trip form, so reloading is bit-exact.
pub fn write_csv_string(dataset: &Dataset) -> String {
    let d = dataset.d();
    let mut out = String::new();
    for f in 0..d {
        let _ = write!(out, "x{f},");
    }
    out.push_str("label\n");
    for i in 0..dataset.n() {
        for v in dataset.sample(i) {
            let _ = write!(out, "{v:?},");
        }
        let _ = writeln!(out, "{}", dataset.labels()[i]);
    }
    out
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, write_csv_string(dataset).as_bytes())
}
