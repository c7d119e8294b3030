//! Nearest line projection training.
//!
//! Each training sample `x_i` is tied to the lines through pairs of its `K`
//! nearest input-space neighbors. For a projection `W`, the squared distance
//! from `W^T x_i` to the projected line through `(x_j, x_k)` equals
//! `||W^T r_ijk||^2` with the input-space residual
//! `r_ijk = x_i - x_k - alpha (x_j - x_k)`, `alpha` taken in the projected
//! space. Summing gives the objective `Tr(W^T L(W) W)` where
//! `L(W) = sum r_ijk r_ijk^T`.
//!
//! Training alternates two steps until the objective settles:
//! with `L` fixed, the best `W` is spanned by eigenvectors of `L`; with `W`
//! fixed, `L` is rebuilt from fresh alphas.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::dataio::{self, Dataset};
use crate::error::{Error, Result};
use crate::geometry;
use crate::linalg;
use crate::model::{MethodConfig, ProjectionMatrix, TrainedModel};
use crate::neighbors::{build_neighbor_lines, NeighborLineIndex};

/// Eigenvalues below this fraction of the mean absolute eigenvalue count as
/// null directions and are ranked last when selecting the smallest.
pub const NULL_SPACE_REL_TOL: f64 = 1e-10;

/// Residual columns accumulated before each rank update.
const RESIDUAL_BLOCK: usize = 256;
/// Upper bound on partial sums in the scatter reduction.
const MAX_PARTIALS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenOrder {
    /// Minimizes the trace objective.
    Smallest,
    /// Keeps the eigenvectors of the largest eigenvalues instead.
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Pca,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub d_prime: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub eigen_order: EigenOrder,
    pub init: InitKind,
    /// Recorded with the model. Training is deterministic and draws no
    /// random numbers.
    pub seed: u64,
    /// Mean-center the training data before fitting.
    pub center: bool,
}

impl TrainConfig {
    pub fn new(k: usize, d_prime: usize) -> Self {
        TrainConfig {
            k,
            d_prime,
            max_iters: 50,
            rel_tol: 1e-6,
            eigen_order: EigenOrder::Smallest,
            init: InitKind::Pca,
            seed: 0,
            center: true,
        }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.d_prime < 1 {
            return Err(Error::InvalidConfig("d_prime must be >= 1".into()));
        }
        if self.d_prime > d {
            return Err(Error::InvalidConfig(format!(
                "d_prime must be <= d = {d}, got {}",
                self.d_prime
            )));
        }
        if self.k < 2 || self.k + 1 > n {
            return Err(Error::InvalidConfig(format!(
                "K must satisfy 2 <= K <= n-1 = {}, got {}",
                n.saturating_sub(1),
                self.k
            )));
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must be a finite nonnegative number, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// The symmetric PSD matrix `L(W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterOperator {
    pub matrix: DMatrix<f64>,
    /// Lines skipped because their projected endpoints (nearly) coincide.
    pub degenerate_lines: usize,
    pub total_lines: usize,
}

fn check_shapes(dataset: &Dataset, index: &NeighborLineIndex, w: &ProjectionMatrix) -> Result<()> {
    if w.d() != dataset.d() {
        return Err(Error::DimensionMismatch {
            expected: dataset.d(),
            found: w.d(),
        });
    }
    if index.n() != dataset.n() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n(),
            found: index.n(),
        });
    }
    Ok(())
}

fn partition(n: usize) -> Vec<std::ops::Range<usize>> {
    let parts = n.clamp(1, MAX_PARTIALS);
    let len = n.div_ceil(parts);
    (0..n)
        .step_by(len.max(1))
        .map(|s| s..(s + len).min(n))
        .collect()
}

fn scatter_partial(
    dataset: &Dataset,
    index: &NeighborLineIndex,
    projected: &DMatrix<f64>,
    range: std::ops::Range<usize>,
) -> (DMatrix<f64>, usize) {
    let d = dataset.d();
    let dp = projected.nrows();
    let y = |i: usize| &projected.as_slice()[i * dp..(i + 1) * dp];
    let mut acc = DMatrix::zeros(d, d);
    let mut block = DMatrix::zeros(d, RESIDUAL_BLOCK);
    let mut filled = 0;
    let mut degenerate = 0;
    let flush = |block: &DMatrix<f64>, filled: usize, acc: &mut DMatrix<f64>| {
        if filled > 0 {
            let r = block.columns(0, filled);
            acc.gemm(1.0, &r, &r.transpose(), 1.0);
        }
    };
    for i in range {
        for &(j, k) in &index.lines[i] {
            let Some(alpha) = geometry::alpha_unchecked(y(i), y(j), y(k)) else {
                degenerate += 1;
                continue;
            };
            let out = &mut block.as_mut_slice()[filled * d..(filled + 1) * d];
            geometry::residual_into(
                dataset.sample(i),
                dataset.sample(j),
                dataset.sample(k),
                alpha,
                out,
            );
            filled += 1;
            if filled == RESIDUAL_BLOCK {
                flush(&block, filled, &mut acc);
                filled = 0;
            }
        }
    }
    flush(&block, filled, &mut acc);
    (acc, degenerate)
}

/// Sums partials pairwise in a fixed tree so the result does not depend on
/// thread scheduling.
fn tree_sum(mut parts: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one partial")
}

/// Builds `L(W)` from input-space residuals whose alphas come from the
/// projected points `W^T x`. Degenerate projected lines are skipped.
pub fn assemble_scatter(
    dataset: &Dataset,
    index: &NeighborLineIndex,
    w: &ProjectionMatrix,
) -> Result<ScatterOperator> {
    check_shapes(dataset, index, w)?;
    let projected = w.apply(dataset.samples())?;
    let partials: Vec<(DMatrix<f64>, usize)> = partition(dataset.n())
        .into_par_iter()
        .map(|r| scatter_partial(dataset, index, &projected, r))
        .collect();
    let degenerate_lines = partials.iter().map(|p| p.1).sum();
    let sum = tree_sum(partials.into_iter().map(|p| p.0).collect());
    let matrix = (&sum + sum.transpose()) * 0.5;
    if degenerate_lines > 0 {
        log::debug!("scatter: skipped {degenerate_lines} degenerate lines");
    }
    Ok(ScatterOperator {
        matrix,
        degenerate_lines,
        total_lines: index.line_count(),
    })
}

/// Sum of squared point-to-line distances measured directly in the projected
/// space. Degenerate lines contribute nothing.
pub fn objective(
    dataset: &Dataset,
    index: &NeighborLineIndex,
    w: &ProjectionMatrix,
) -> Result<f64> {
    check_shapes(dataset, index, w)?;
    let projected = w.apply(dataset.samples())?;
    let dp = projected.nrows();
    let y = |i: usize| &projected.as_slice()[i * dp..(i + 1) * dp];
    Ok((0..dataset.n())
        .map(|i| {
            index.lines[i]
                .iter()
                .filter_map(|&(j, k)| geometry::sqdist_unchecked(y(i), y(j), y(k)))
                .sum::<f64>()
        })
        .sum())
}

/// Result of one eigen step.
#[derive(Debug, Clone)]
pub struct EigenStep {
    pub projection: ProjectionMatrix,
    /// Eigenvalues of the selected columns, in column order.
    pub eigenvalues: Vec<f64>,
    /// Number of null-space eigenvectors that were ranked last.
    pub null_directions: usize,
}

pub fn eigen_step_detailed(
    l: &DMatrix<f64>,
    d_prime: usize,
    order: EigenOrder,
) -> Result<EigenStep> {
    let d = l.nrows();
    if d_prime < 1 || d_prime > d {
        return Err(Error::InvalidConfig(format!(
            "d_prime must satisfy 1 <= d' <= d = {d}, got {d_prime}"
        )));
    }
    let eig = linalg::symmetric_eigen(l)?;
    let mut ranked: Vec<usize> = (0..d).collect();
    let mut null_directions = 0;
    match order {
        EigenOrder::Largest => ranked.reverse(),
        EigenOrder::Smallest => {
            let scale = eig.values.iter().map(|v| v.abs()).sum::<f64>() / d as f64;
            let threshold = NULL_SPACE_REL_TOL * scale;
            let (null, rest): (Vec<usize>, Vec<usize>) = ranked
                .into_iter()
                .partition(|&c| eig.values[c].abs() < threshold);
            null_directions = null.len();
            ranked = rest.into_iter().chain(null).collect();
        }
    }
    let chosen = &ranked[..d_prime];
    if null_directions > 0 {
        log::debug!("eigen step: ranked {null_directions} null directions last");
    }
    let projection = ProjectionMatrix::new(eig.vectors.select_columns(chosen))?;
    Ok(EigenStep {
        projection,
        eigenvalues: chosen.iter().map(|&c| eig.values[c]).collect(),
        null_directions,
    })
}

/// Orthonormal `W` from the eigenvectors of `L` selected by `order`.
pub fn eigen_step(
    l: &ScatterOperator,
    d_prime: usize,
    order: EigenOrder,
) -> Result<ProjectionMatrix> {
    Ok(eigen_step_detailed(&l.matrix, d_prime, order)?.projection)
}

/// What happened in one alternation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    /// 1-based.
    pub iteration: usize,
    /// `Tr(W_old^T L W_old)` with `L = L(W_old)`.
    pub trace_before: f64,
    /// `Tr(W_new^T L W_new)` with the same `L`.
    pub trace_after: f64,
    pub eigenvalue_sum: f64,
    pub orthonormality_error: f64,
    pub degenerate_lines: usize,
    /// Objective of `W_new` under its own `L(W_new)`.
    pub objective: f64,
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    train_observed(dataset, config, |_| {})
}

/// Like [`train`], reporting each alternation to `observe`.
pub fn train_observed(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observe: impl FnMut(&IterationStats),
) -> Result<TrainedModel> {
    config.validate(dataset.n(), dataset.d())?;
    let data = if dataset.is_centered() || !config.center {
        dataset.clone()
    } else {
        dataio::center(dataset)?
    };
    let mean_vector = if data.is_centered() {
        data.mean_vector().clone()
    } else {
        DVector::zeros(data.d())
    };

    let index = build_neighbor_lines(&data, config.k)?;
    let mut w = match config.init {
        InitKind::Pca => baselines::principal_directions(&data, config.d_prime)?,
        InitKind::Identity => ProjectionMatrix::identity_columns(data.d(), config.d_prime)?,
    };

    let mut current = objective(&data, &index, &w)?;
    check_finite(current, 0)?;
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 1..=config.max_iters {
        let scatter = assemble_scatter(&data, &index, &w)?;
        let step = eigen_step_detailed(&scatter.matrix, config.d_prime, config.eigen_order)?;
        let next = step.projection;
        let value = objective(&data, &index, &next)?;
        check_finite(value, iteration)?;
        observe(&IterationStats {
            iteration,
            trace_before: linalg::trace_quadratic(&scatter.matrix, w.matrix()),
            trace_after: linalg::trace_quadratic(&scatter.matrix, next.matrix()),
            eigenvalue_sum: step.eigenvalues.iter().sum(),
            orthonormality_error: next.orthonormality_error(),
            degenerate_lines: scatter.degenerate_lines,
            objective: value,
        });
        log::debug!("iteration {iteration}: objective {value:.6e}");

        let change = (value - current).abs();
        trace.push(value);
        w = next;
        iterations_run = iteration;
        let settled = change < config.rel_tol * current.abs().max(f64::MIN_POSITIVE);
        current = value;
        if settled {
            converged = true;
            break;
        }
    }

    Ok(TrainedModel {
        projection: w,
        mean_vector,
        config: MethodConfig::Nlp(config.clone()),
        objective_trace: trace,
        iterations_run,
        converged,
    })
}

fn check_finite(value: f64, iteration: usize) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "objective became {value} at iteration {iteration}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Dataset::from_row_vecs(&rows, vec![0; n]).unwrap()
    }

    #[test]
    fn collinear_triple_contributes_nothing() {
        let rows = vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![2.0, 2.0]];
        let ds = Dataset::from_row_vecs(&rows, vec![0; 3]).unwrap();
        let index = NeighborLineIndex {
            neighbors: vec![vec![1, 2], vec![0, 2], vec![0, 1]],
            lines: vec![vec![(1, 2)], vec![], vec![]],
        };
        let w = ProjectionMatrix::identity_columns(2, 2).unwrap();
        let l = assemble_scatter(&ds, &index, &w).unwrap();
        assert!(l.matrix.amax() < 1e-15);
    }

    #[test]
    fn trace_form_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_dataset(&mut rng, 30, 6);
        let index = build_neighbor_lines(&ds, 4).unwrap();
        let w = synthetic::random_orthonormal(&mut rng, 6, 3);
        let l = assemble_scatter(&ds, &index, &w).unwrap();
        let direct = objective(&ds, &index, &w).unwrap();
        let tr = linalg::trace_quadratic(&l.matrix, w.matrix());
        assert!(
            (direct - tr).abs() <= 1e-8 * direct.max(1e-300),
            "{direct} vs {tr}"
        );
    }

    #[test]
    fn scatter_scales_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = random_dataset(&mut rng, 20, 5);
        let index = build_neighbor_lines(&ds, 3).unwrap();
        let w = synthetic::random_orthonormal(&mut rng, 5, 2);
        let l1 = assemble_scatter(&ds, &index, &w).unwrap().matrix;
        let l2 = assemble_scatter(&ds.scaled(2.0), &index, &w)
            .unwrap()
            .matrix;
        assert!((l2 - l1.clone() * 4.0).amax() <= 1e-12 * l1.amax());
    }

    #[test]
    fn scatter_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_dataset(&mut rng, 40, 8);
        let index = build_neighbor_lines(&ds, 5).unwrap();
        let w = synthetic::random_orthonormal(&mut rng, 8, 3);
        let l = assemble_scatter(&ds, &index, &w).unwrap().matrix;
        assert_eq!(l, l.transpose());
        let e = linalg::symmetric_eigen(&l).unwrap();
        let largest = *e.values.last().unwrap();
        assert!(e.values[0] >= -1e-8 * largest);
    }

    #[test]
    fn identical_points_have_zero_objective() {
        let ds = Dataset::from_row_vecs(&vec![vec![1.0, 2.0, 3.0]; 5], vec![0; 5]).unwrap();
        let index = build_neighbor_lines(&ds, 3).unwrap();
        let w = ProjectionMatrix::identity_columns(3, 2).unwrap();
        assert_eq!(objective(&ds, &index, &w).unwrap(), 0.0);
        let l = assemble_scatter(&ds, &index, &w).unwrap();
        assert_eq!(l.degenerate_lines, l.total_lines);
    }

    #[test]
    fn objective_scales_with_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ds = random_dataset(&mut rng, 15, 4);
        let index = build_neighbor_lines(&ds, 3).unwrap();
        let w = synthetic::random_orthonormal(&mut rng, 4, 2);
        let base = objective(&ds, &index, &w).unwrap();
        let scaled = objective(&ds, &index, &w.scaled(3.0)).unwrap();
        assert!((scaled - 9.0 * base).abs() <= 1e-10 * scaled);
    }

    #[test]
    fn eigen_step_diagonal() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let step = eigen_step_detailed(&l, 1, EigenOrder::Smallest).unwrap();
        assert_eq!(step.projection.matrix().as_slice(), &[0.0, 1.0]);
        assert_eq!(step.eigenvalues, vec![1.0]);
        let step = eigen_step_detailed(&l, 1, EigenOrder::Largest).unwrap();
        assert_eq!(step.projection.matrix().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn eigen_step_degenerate_spectrum() {
        let l = DMatrix::<f64>::identity(4, 4);
        let w = eigen_step_detailed(&l, 2, EigenOrder::Smallest)
            .unwrap()
            .projection;
        assert!(w.orthonormality_error() < 1e-12);
        assert!((linalg::trace_quadratic(&l, w.matrix()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn null_directions_are_ranked_last() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0, 5.0, 0.0]));
        let step = eigen_step_detailed(&l, 2, EigenOrder::Smallest).unwrap();
        assert_eq!(step.null_directions, 2);
        assert_eq!(step.eigenvalues, vec![2.0, 5.0]);
        let step = eigen_step_detailed(&l, 3, EigenOrder::Smallest).unwrap();
        assert_eq!(step.eigenvalues, vec![2.0, 5.0, 0.0]);
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ds = random_dataset(&mut rng, 20, 5);
        let cfg = TrainConfig {
            max_iters: 0,
            ..TrainConfig::new(3, 2)
        };
        let m = train(&ds, &cfg).unwrap();
        let init = baselines::principal_directions(&dataio::center(&ds).unwrap(), 2).unwrap();
        assert_eq!(m.projection, init);
        assert!(m.objective_trace.is_empty());
        assert_eq!(m.iterations_run, 0);
        assert!(!m.converged);
    }

    #[test]
    fn collinear_data_is_a_zero_loss_fixed_point() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|t| {
                let t = t as f64 * 0.37 - 2.0;
                vec![1.0 + 2.0 * t, -0.5 * t, 3.0 + t]
            })
            .collect();
        let ds = Dataset::from_row_vecs(&rows, vec![0; 12]).unwrap();
        let m = train(&ds, &TrainConfig::new(3, 1)).unwrap();
        assert!(*m.objective_trace.last().unwrap() < 1e-8);
        assert!(m.converged);
    }

    #[test]
    fn training_is_deterministic_and_orthonormal() {
        let ds = synthetic::gaussian_classes(3, 20, 12, 3.0, 21);
        let cfg = TrainConfig::new(4, 3);
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.projection.orthonormality_error() < 1e-8);
        assert!(a.objective_trace.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(a.objective_trace.len(), a.iterations_run);
    }

    #[test]
    fn eigenvalue_sum_equals_fixed_l_trace() {
        let ds = synthetic::gaussian_classes(3, 15, 10, 2.0, 8);
        let mut checked = 0;
        train_observed(&ds, &TrainConfig::new(4, 3), |s| {
            assert!(
                (s.trace_after - s.eigenvalue_sum).abs() <= 1e-8 * s.trace_after.abs().max(1e-12)
            );
            assert!(s.trace_after <= s.trace_before + 1e-9);
            assert!(s.orthonormality_error < 1e-8);
            checked += 1;
        })
        .unwrap();
        assert!(checked > 0);
    }

    #[test]
    fn final_objective_matches_projected_geometry() {
        let ds = synthetic::gaussian_classes(2, 15, 8, 2.0, 9);
        let m = train(&ds, &TrainConfig::new(3, 2)).unwrap();
        let index = build_neighbor_lines(&ds, 3).unwrap();
        let ys: Vec<Vec<f64>> = (0..ds.n())
            .map(|i| m.project(ds.sample(i)).unwrap())
            .collect();
        let mut total = 0.0;
        for (i, lines) in index.lines.iter().enumerate() {
            for &(j, k) in lines {
                if let Ok(v) = geometry::point_line_sqdist(&ys[i], &ys[j], &ys[k]) {
                    total += v;
                }
            }
        }
        let last = *m.objective_trace.last().unwrap();
        assert!(
            (total - last).abs() <= 1e-8 * last.max(1e-300),
            "{total} vs {last}"
        );
    }

    #[test]
    fn config_validation() {
        let ds = synthetic::gaussian_classes(2, 5, 4, 1.0, 1);
        assert!(train(&ds, &TrainConfig::new(3, 0)).is_err());
        assert!(train(&ds, &TrainConfig::new(3, 5)).is_err());
        assert!(train(&ds, &TrainConfig::new(1, 2)).is_err());
        assert!(train(&ds, &TrainConfig::new(10, 2)).is_err());
    }
}
