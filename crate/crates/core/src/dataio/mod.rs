//! Dataset ingestion, preprocessing, train/test splitting and persistence.
//!
//! Samples are stored column-wise (`d x n`) so that each sample is a
//! contiguous slice; the logical view is still `n` samples by `d` features.

mod csv;
mod model_file;
mod pgm;
mod split;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, save_csv, write_csv_string, LabelColumn};
pub use self::model_file::{
    load_model, model_from_json, model_to_json, save_model, MODEL_SCHEMA_VERSION,
};
pub use self::pgm::{load_pgm_dir, read_pgm};
pub use self::split::{random_split, split_indices, SplitIndices, SplitSpec};

/// Tolerance on column means for a dataset flagged as centered.
pub const CENTERING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: DMatrix<f64>,
    labels: Vec<u32>,
    centered: bool,
    mean_vector: DVector<f64>,
}

impl Dataset {
    /// Builds a dataset from a `d x n` matrix whose columns are samples.
    pub fn from_columns(samples: DMatrix<f64>, labels: Vec<u32>) -> Result<Self> {
        let (d, n) = samples.shape();
        if n < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 samples, found {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidDataset("need at least 1 feature".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} samples",
                labels.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at sample {}, feature {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Dataset {
            samples,
            labels,
            centered: false,
            mean_vector: DVector::zeros(d),
        })
    }

    /// Builds a dataset from an `n x d` feature matrix (one row per sample).
    pub fn from_rows(features: &DMatrix<f64>, labels: Vec<u32>) -> Result<Self> {
        Self::from_columns(features.transpose(), labels)
    }

    pub fn from_row_vecs(rows: &[Vec<f64>], labels: Vec<u32>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} features, expected {d}",
                r.len()
            )));
        }
        let samples = DMatrix::from_fn(d, rows.len(), |f, s| rows[s][f]);
        Self::from_columns(samples, labels)
    }

    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn d(&self) -> usize {
        self.samples.nrows()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.samples.as_slice()[i * d..(i + 1) * d]
    }

    /// The `d x n` sample matrix.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// The `n x d` feature matrix.
    pub fn features(&self) -> DMatrix<f64> {
        self.samples.transpose()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn mean_vector(&self) -> &DVector<f64> {
        &self.mean_vector
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn class_indices(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        map
    }

    pub fn column_means(&self) -> DVector<f64> {
        self.samples.column_mean()
    }

    /// Rows selected by `indices`, in that order. The result is uncentered
    /// unless `self` is centered, in which case the flag and mean carry over.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = self.samples.select_columns(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Dataset::from_columns(samples, labels)?;
        out.centered = self.centered;
        out.mean_vector = self.mean_vector.clone();
        Ok(out)
    }

    /// Same samples with replaced labels.
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Dataset> {
        if labels.len() != self.n() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} samples",
                labels.len(),
                self.n()
            )));
        }
        Ok(Dataset {
            labels,
            ..self.clone()
        })
    }

    pub fn scaled(&self, factor: f64) -> Dataset {
        Dataset {
            samples: &self.samples * factor,
            mean_vector: &self.mean_vector * factor,
            ..self.clone()
        }
    }
}

/// Subtracts the column mean, returning a centered copy.
pub fn center(dataset: &Dataset) -> Result<Dataset> {
    if dataset.centered {
        return Err(Error::AlreadyCentered);
    }
    let mean = dataset.column_means();
    let mut samples = dataset.samples.clone();
    for mut col in samples.column_iter_mut() {
        col -= &mean;
    }
    Ok(Dataset {
        samples,
        labels: dataset.labels.clone(),
        centered: true,
        mean_vector: mean,
    })
}
