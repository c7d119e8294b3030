use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{MethodConfig, ProjectionMatrix, TrainedModel};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    d: usize,
    d_prime: usize,
    mean_vector: Vec<f64>,
    /// One length-`d` vector per output dimension.
    projection_columns: Vec<Vec<f64>>,
    train_config: MethodConfig,
    objective_trace: Vec<f64>,
    iterations_run: usize,
    converged: bool,
}

pub fn model_to_json(model: &TrainedModel) -> String {
    let doc = ModelDocument {
        schema_version: MODEL_SCHEMA_VERSION,
        d: model.d(),
        d_prime: model.d_prime(),
        mean_vector: model.mean_vector.iter().copied().collect(),
        projection_columns: model.projection.column_vecs(),
        train_config: model.config.clone(),
        objective_trace: model.objective_trace.clone(),
        iterations_run: model.iterations_run,
        converged: model.converged,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str, origin: &Path) -> Result<TrainedModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|source| Error::Json {
        path: origin.to_path_buf(),
        source,
    })?;
    let bad = |message: String| Error::BadFile {
        path: origin.to_path_buf(),
        message,
    };
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(bad(format!(
            "unsupported schema_version {} (expected {MODEL_SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    if doc.mean_vector.len() != doc.d || doc.projection_columns.len() != doc.d_prime {
        return Err(bad(format!(
            "declared shape d = {}, d_prime = {} does not match the stored arrays",
            doc.d, doc.d_prime
        )));
    }
    if doc.projection_columns.iter().any(|c| c.len() != doc.d) {
        return Err(bad("projection column length differs from d".into()));
    }
    let projection = ProjectionMatrix::from_column_vecs(&doc.projection_columns)?;
    Ok(TrainedModel {
        projection,
        mean_vector: DVector::from_vec(doc.mean_vector),
        config: doc.train_config,
        objective_trace: doc.objective_trace,
        iterations_run: doc.iterations_run,
        converged: doc.converged,
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}
