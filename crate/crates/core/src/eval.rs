//! Nearest-neighbor and nearest-line classification and the repeated
//! random-split evaluation protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines;
use crate::dataio::{split_indices, Dataset, SplitIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{MethodConfig, TrainedModel};
use crate::neighbors::sq_dist;
use crate::nlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    /// Lines through two training samples of the same class.
    WithinClass,
    /// Lines through any two training samples.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Nn,
    NearestLine { scope: PairScope },
}

impl Classifier {
    pub fn nearest_line() -> Self {
        Classifier::NearestLine {
            scope: PairScope::WithinClass,
        }
    }
}

fn check_train(train: &DMatrix<f64>, labels: &[u32], query: &[f64]) -> Result<()> {
    if train.ncols() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if labels.len() != train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: train.ncols(),
            found: labels.len(),
        });
    }
    if query.len() != train.nrows() {
        return Err(Error::DimensionMismatch {
            expected: train.nrows(),
            found: query.len(),
        });
    }
    Ok(())
}

fn column(m: &DMatrix<f64>, i: usize) -> &[f64] {
    let r = m.nrows();
    &m.as_slice()[i * r..(i + 1) * r]
}

/// Label of the nearest training column; the smaller index wins ties.
pub fn classify_1nn(
    train_projected: &DMatrix<f64>,
    train_labels: &[u32],
    query: &[f64],
) -> Result<u32> {
    check_train(train_projected, train_labels, query)?;
    let mut best = (f64::INFINITY, 0);
    for i in 0..train_projected.ncols() {
        let d = sq_dist(column(train_projected, i), query);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(train_labels[best.1])
}

/// Label of the nearest line through two training columns. Within-class
/// lines carry their class; for all-pairs lines the endpoint nearer to the
/// query decides. Ties resolve to the lexicographically smaller pair.
pub fn classify_nearest_line(
    train_projected: &DMatrix<f64>,
    train_labels: &[u32],
    query: &[f64],
    scope: PairScope,
) -> Result<u32> {
    check_train(train_projected, train_labels, query)?;
    let m = train_projected.ncols();
    let mut best: Option<(f64, usize, usize)> = None;
    for j in 0..m {
        let yj = column(train_projected, j);
        for k in j + 1..m {
            if scope == PairScope::WithinClass && train_labels[j] != train_labels[k] {
                continue;
            }
            let yk = column(train_projected, k);
            let Some(d) = geometry::sqdist_unchecked(query, yj, yk) else {
                continue;
            };
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, j, k));
            }
        }
    }
    let (_, j, k) = best.ok_or(Error::NoValidLines)?;
    Ok(match scope {
        PairScope::WithinClass => train_labels[j],
        PairScope::AllPairs => {
            let dj = sq_dist(query, column(train_projected, j));
            let dk = sq_dist(query, column(train_projected, k));
            if dk < dj {
                train_labels[k]
            } else {
                train_labels[j]
            }
        }
    })
}

pub fn classify(
    classifier: Classifier,
    train_projected: &DMatrix<f64>,
    train_labels: &[u32],
    query: &[f64],
) -> Result<u32> {
    match classifier {
        Classifier::Nn => classify_1nn(train_projected, train_labels, query),
        Classifier::NearestLine { scope } => {
            classify_nearest_line(train_projected, train_labels, query, scope)
        }
    }
}

/// Trains whichever method `config` names.
pub fn fit(dataset: &Dataset, config: &MethodConfig) -> Result<TrainedModel> {
    match config {
        MethodConfig::Nlp(c) => nlp::train(dataset, c),
        MethodConfig::Baseline(b) => baselines::train_baseline(dataset, b),
    }
}

fn sha256_hex(bytes: impl IntoIterator<Item = [u8; 8]>) -> String {
    let mut h = Sha256::new();
    for b in bytes {
        h.update(b);
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Digest of the training indices of a split.
pub fn indices_fingerprint(indices: &[usize]) -> String {
    sha256_hex(indices.iter().map(|&i| (i as u64).to_le_bytes()))
}

/// Digest of everything a model uses at projection time.
pub fn model_fingerprint(model: &TrainedModel) -> String {
    sha256_hex(
        model
            .mean_vector
            .iter()
            .chain(model.projection.matrix().iter())
            .map(|v| v.to_bits().to_le_bytes()),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatFingerprint {
    pub train_indices_sha256: String,
    pub model_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub per_repeat_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation (divisor = number of repeats).
    pub std_accuracy: f64,
    pub std_kind: String,
    pub config_snapshot: serde_json::Value,
    pub per_class_accuracy: Option<BTreeMap<u32, f64>>,
    pub repeat_fingerprints: Vec<RepeatFingerprint>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per repeat: `method,repeat,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,repeat,accuracy\n");
        for (r, a) in self.per_repeat_accuracy.iter().enumerate() {
            let _ = writeln!(out, "{},{r},{a:?}", self.method);
        }
        out
    }

    /// `accuracy: M.MMMM ± S.SSSS`
    pub fn summary_line(&self) -> String {
        format!(
            "accuracy: {:.4} ± {:.4}",
            self.mean_accuracy, self.std_accuracy
        )
    }
}

/// Everything produced by one split of an experiment.
#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub indices: SplitIndices,
    pub model: TrainedModel,
    pub predictions: Vec<u32>,
    pub truth: Vec<u32>,
    pub accuracy: f64,
}

/// Split, fit on the training part only, project both parts and classify
/// every test sample.
pub fn run_repeat(
    dataset: &Dataset,
    method: &MethodConfig,
    split: &SplitSpec,
    classifier: Classifier,
    repeat: usize,
) -> Result<RepeatOutcome> {
    let indices = split_indices(dataset.labels(), split, repeat)?;
    if indices.test.is_empty() {
        return Err(Error::InvalidConfig(
            "split leaves no test samples; lower the train fraction".into(),
        ));
    }
    let train = dataset.subset(&indices.train)?;
    let test = dataset.subset(&indices.test)?;
    let model = fit(&train, method)?;
    let train_y = model.project_samples(train.samples())?;
    let test_y = model.project_samples(test.samples())?;
    let predictions = (0..test.n())
        .map(|i| {
            let q = column(&test_y, i);
            classify(classifier, &train_y, train.labels(), q)
        })
        .collect::<Result<Vec<u32>>>()?;
    let truth = test.labels().to_vec();
    let correct = predictions
        .iter()
        .zip(&truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(RepeatOutcome {
        accuracy: correct as f64 / truth.len() as f64,
        indices,
        model,
        predictions,
        truth,
    })
}

pub fn run_experiment(
    dataset: &Dataset,
    method: &MethodConfig,
    split: &SplitSpec,
    classifier: Classifier,
) -> Result<EvalReport> {
    split.validate()?;
    // collect everything first so the reported failure is the lowest repeat
    let results: Vec<Result<RepeatOutcome>> = (0..split.repeats)
        .into_par_iter()
        .map(|r| {
            run_repeat(dataset, method, split, classifier, r).map_err(|e| Error::Repeat {
                repeat: r,
                source: Box::new(e),
            })
        })
        .collect();
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let per_repeat_accuracy: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&per_repeat_accuracy);

    let mut per_class: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for o in &outcomes {
        for (p, t) in o.predictions.iter().zip(&o.truth) {
            let e = per_class.entry(*t).or_default();
            e.1 += 1;
            if p == t {
                e.0 += 1;
            }
        }
    }
    let per_class_accuracy = per_class
        .into_iter()
        .map(|(c, (ok, total))| (c, ok as f64 / total as f64))
        .collect();

    Ok(EvalReport {
        method: method.name().to_string(),
        per_repeat_accuracy,
        mean_accuracy,
        std_accuracy,
        std_kind: "population".into(),
        config_snapshot: serde_json::json!({
            "method": method,
            "split": split,
            "classifier": classifier,
        }),
        per_class_accuracy: Some(per_class_accuracy),
        repeat_fingerprints: outcomes
            .iter()
            .map(|o| RepeatFingerprint {
                train_indices_sha256: indices_fingerprint(&o.indices.train),
                model_sha256: model_fingerprint(&o.model),
            })
            .collect(),
    })
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
