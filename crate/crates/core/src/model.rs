//! Projection matrices and trained models shared by every method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nlp::TrainConfig;

/// A `d x d'` linear map; samples project as `y = W^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
}

impl ProjectionMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (d, d_prime) = matrix.shape();
        if d_prime == 0 || d_prime > d {
            return Err(Error::InvalidConfig(format!(
                "projection must satisfy 1 <= d' <= d, got d = {d}, d' = {d_prime}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("projection has non-finite entries".into()));
        }
        Ok(ProjectionMatrix { matrix })
    }

    /// The first `d_prime` columns of the `d x d` identity.
    pub fn identity_columns(d: usize, d_prime: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d_prime))
    }

    pub fn from_column_vecs(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidConfig(
                "projection columns differ in length".into(),
            ));
        }
        Self::new(DMatrix::from_fn(d, columns.len(), |r, c| columns[c][r]))
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d_prime(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column_vecs(&self) -> Vec<Vec<f64>> {
        self.matrix
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    pub fn orthonormality_error(&self) -> f64 {
        linalg::orthonormality_error(&self.matrix)
    }

    /// `W^T X` for a `d x n` sample matrix.
    pub fn apply(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.nrows() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: samples.nrows(),
            });
        }
        Ok(self.matrix.tr_mul(samples))
    }

    /// Same map with every entry multiplied by `c`; not orthonormal unless |c| = 1.
    pub fn scaled(&self, c: f64) -> ProjectionMatrix {
        ProjectionMatrix {
            matrix: &self.matrix * c,
        }
    }
}

/// Configuration of whichever method produced a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MethodConfig {
    Nlp(TrainConfig),
    Baseline(BaselineConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Nlp(_) => "nlp",
            MethodConfig::Baseline(b) => b.method.name(),
        }
    }

    pub fn d_prime(&self) -> usize {
        match self {
            MethodConfig::Nlp(c) => c.d_prime,
            MethodConfig::Baseline(b) => b.d_prime,
        }
    }

    pub fn with_d_prime(&self, d_prime: usize) -> MethodConfig {
        match self {
            MethodConfig::Nlp(c) => MethodConfig::Nlp(TrainConfig {
                d_prime,
                ..c.clone()
            }),
            MethodConfig::Baseline(b) => MethodConfig::Baseline(BaselineConfig {
                d_prime,
                ..b.clone()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub projection: ProjectionMatrix,
    pub mean_vector: DVector<f64>,
    pub config: MethodConfig,
    /// Training objective after every update of `W`; baselines record a
    /// single summary value.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl TrainedModel {
    pub fn d(&self) -> usize {
        self.projection.d()
    }

    pub fn d_prime(&self) -> usize {
        self.projection.d_prime()
    }

    /// `W^T (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: x.len(),
            });
        }
        let w = self.projection.matrix();
        Ok((0..self.d_prime())
            .map(|c| {
                w.column(c)
                    .iter()
                    .zip(x)
                    .zip(self.mean_vector.iter())
                    .map(|((wi, xi), mi)| wi * (xi - mi))
                    .sum()
            })
            .collect())
    }

    /// Projects every column of a `d x n` sample matrix.
    pub fn project_samples(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.nrows() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: samples.nrows(),
            });
        }
        let mut shifted = samples.clone();
        for mut col in shifted.column_iter_mut() {
            col -= &self.mean_vector;
        }
        self.projection.apply(&shifted)
    }
}
