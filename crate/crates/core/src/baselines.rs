//! Reference projections: PCA and Locality Preserving Projections.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataio::{self, Dataset};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{MethodConfig, ProjectionMatrix, TrainedModel};
use crate::neighbors;

/// Eigenvalues of `X D X^T` below this fraction of the largest are outside
/// the data span and dropped before solving the LPP problem.
const SPAN_REL_TOL: f64 = 1e-10;
const LPP_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Pca,
    Lpp,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Pca => "pca",
            BaselineMethod::Lpp => "lpp",
        }
    }
}

/// Heat-kernel width for LPP edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SigmaRepr", try_from = "SigmaRepr")]
pub enum HeatSigma {
    /// Median of the nonzero kNN distances.
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Value(f64),
    Keyword(String),
}

impl From<HeatSigma> for SigmaRepr {
    fn from(s: HeatSigma) -> Self {
        match s {
            HeatSigma::Auto => SigmaRepr::Keyword("auto".into()),
            HeatSigma::Fixed(v) => SigmaRepr::Value(v),
        }
    }
}

impl TryFrom<SigmaRepr> for HeatSigma {
    type Error = String;

    fn try_from(r: SigmaRepr) -> std::result::Result<Self, String> {
        match r {
            SigmaRepr::Value(v) => Ok(HeatSigma::Fixed(v)),
            SigmaRepr::Keyword(k) => k.parse(),
        }
    }
}

impl FromStr for HeatSigma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(HeatSigma::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(HeatSigma::Fixed(v)),
            _ => Err(format!(
                "heat sigma must be \"auto\" or a positive number, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for HeatSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeatSigma::Auto => f.write_str("auto"),
            HeatSigma::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub d_prime: usize,
    /// Graph neighbors (LPP only).
    pub k: usize,
    pub heat_sigma: HeatSigma,
}

impl BaselineConfig {
    pub fn pca(d_prime: usize) -> Self {
        BaselineConfig {
            method: BaselineMethod::Pca,
            d_prime,
            k: 5,
            heat_sigma: HeatSigma::Auto,
        }
    }

    pub fn lpp(d_prime: usize, k: usize) -> Self {
        BaselineConfig {
            method: BaselineMethod::Lpp,
            d_prime,
            k,
            heat_sigma: HeatSigma::Auto,
        }
    }
}

fn centered(dataset: &Dataset) -> Result<Dataset> {
    if dataset.is_centered() {
        Ok(dataset.clone())
    } else {
        dataio::center(dataset)
    }
}

fn covariance(data: &Dataset) -> DMatrix<f64> {
    let x = data.samples();
    let mean = data.column_means();
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        col -= &mean;
    }
    let denom = (data.n() - 1).max(1) as f64;
    (&xc * xc.transpose()) / denom
}

/// The `d_prime` leading principal directions, largest variance first.
pub fn principal_directions(data: &Dataset, d_prime: usize) -> Result<ProjectionMatrix> {
    if d_prime < 1 || d_prime > data.d() {
        return Err(Error::InvalidConfig(format!(
            "d_prime must satisfy 1 <= d' <= d = {}, got {d_prime}",
            data.d()
        )));
    }
    let eig = linalg::symmetric_eigen(&covariance(data))?;
    let d = data.d();
    let cols: Vec<usize> = (0..d_prime).map(|c| d - 1 - c).collect();
    ProjectionMatrix::new(eig.vectors.select_columns(&cols))
}

/// Variance of the data captured by `w`: `Tr(W^T C W)`.
pub fn captured_variance(data: &Dataset, w: &ProjectionMatrix) -> f64 {
    linalg::trace_quadratic(&covariance(data), w.matrix())
}

pub fn train_pca(dataset: &Dataset, d_prime: usize) -> Result<TrainedModel> {
    let limit = (dataset.n() - 1).min(dataset.d());
    if d_prime < 1 || d_prime > limit {
        return Err(Error::InvalidConfig(format!(
            "PCA d_prime must satisfy 1 <= d' <= min(n-1, d) = {limit}, got {d_prime}"
        )));
    }
    let data = centered(dataset)?;
    let w = principal_directions(&data, d_prime)?;
    let captured = captured_variance(&data, &w).max(0.0);
    Ok(TrainedModel {
        projection: w,
        mean_vector: data.mean_vector().clone(),
        config: MethodConfig::Baseline(BaselineConfig::pca(d_prime)),
        objective_trace: vec![captured],
        iterations_run: 0,
        converged: true,
    })
}

/// Weighted kNN graph, symmetrized: an edge exists when either endpoint
/// lists the other. Returns `(i, j, weight)` with `i < j`.
type Edge = (usize, usize, f64);

fn heat_kernel_edges(data: &Dataset, k: usize, sigma: HeatSigma) -> Result<(Vec<Edge>, f64)> {
    let nn = neighbors::knn(data, k)?;
    let sigma = match sigma {
        HeatSigma::Fixed(s) => s,
        HeatSigma::Auto => {
            let mut dists: Vec<f64> = nn
                .iter()
                .flatten()
                .map(|&(_, d2)| d2.sqrt())
                .filter(|&d| d > 0.0)
                .collect();
            if dists.is_empty() {
                1.0
            } else {
                dists.sort_by(f64::total_cmp);
                let m = dists.len();
                if m % 2 == 1 {
                    dists[m / 2]
                } else {
                    0.5 * (dists[m / 2 - 1] + dists[m / 2])
                }
            }
        }
    };
    let mut edges: Vec<Edge> = nn
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .map(move |&(j, d2)| (i.min(j), i.max(j), (-d2 / (sigma * sigma)).exp()))
        })
        .collect();
    edges.sort_by_key(|e| (e.0, e.1));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Ok((edges, sigma))
}

/// Generalized-eigenvector solution of `X L X^T w = lambda X D X^T w`,
/// smallest eigenvalues first. The problem is solved inside the span of
/// the data, where `X D X^T` is ridge-regularized for invertibility.
pub fn train_lpp(dataset: &Dataset, config: &BaselineConfig) -> Result<TrainedModel> {
    let n = dataset.n();
    if config.k < 1 || config.k >= n {
        return Err(Error::InvalidConfig(format!(
            "LPP K must satisfy 1 <= K <= n-1 = {}, got {}",
            n - 1,
            config.k
        )));
    }
    if config.d_prime < 1 || config.d_prime > dataset.d() {
        return Err(Error::InvalidConfig(format!(
            "d_prime must satisfy 1 <= d' <= d = {}, got {}",
            dataset.d(),
            config.d_prime
        )));
    }
    let data = centered(dataset)?;
    let d = data.d();
    let (edges, sigma) = heat_kernel_edges(&data, config.k, config.heat_sigma)?;
    log::debug!("lpp: {} edges, sigma {sigma:.4e}", edges.len());

    let mut degree = vec![0.0; n];
    let mut diffs = DMatrix::zeros(d, edges.len());
    for (e, &(i, j, w)) in edges.iter().enumerate() {
        degree[i] += w;
        degree[j] += w;
        let s = w.sqrt();
        for (r, (a, b)) in data.sample(i).iter().zip(data.sample(j)).enumerate() {
            diffs[(r, e)] = s * (a - b);
        }
    }
    let laplacian_form = &diffs * diffs.transpose();
    let mut weighted = data.samples().clone();
    for (mut col, &dg) in weighted.column_iter_mut().zip(&degree) {
        col *= dg.sqrt();
    }
    let degree_form = &weighted * weighted.transpose();

    let span = restrict_to_span(&laplacian_form, &degree_form)?;
    let (basis, reduced_a, reduced_b) = (span.basis, span.reduced_a, span.reduced_b);
    let r = basis.ncols();
    let solved = config.d_prime.min(r);
    if solved < config.d_prime {
        log::warn!(
            "lpp: d_prime {} exceeds the data rank {r}; padding with directions outside the data span",
            config.d_prime
        );
    }

    let ridge = LPP_RIDGE * (reduced_b.trace() / r as f64).max(f64::MIN_POSITIVE);
    let regularized = &reduced_b + DMatrix::<f64>::identity(r, r) * ridge;
    let chol = Cholesky::new(regularized.clone()).ok_or_else(|| {
        let eig = linalg::symmetric_eigen(&regularized).ok();
        let cond = eig
            .map(|e| e.values[r - 1] / e.values[0])
            .unwrap_or(f64::NAN);
        Error::Numerical(format!(
            "regularized X D X^T is not positive definite (condition estimate {cond:.3e})"
        ))
    })?;
    let lower = chol.l();
    let half = lower
        .solve_lower_triangular(&reduced_a)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = lower
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let eig = linalg::symmetric_eigen(&whitened)?;
    let v = eig.vectors.columns(0, solved).into_owned();
    let reduced_w = lower
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let full = &basis * reduced_w;
    let cols: Vec<DVector<f64>> = full
        .column_iter()
        .map(|c| linalg::fix_sign(c.into_owned()))
        .chain(
            span.complement
                .column_iter()
                .rev()
                .take(config.d_prime - solved)
                .map(|c| c.into_owned()),
        )
        .collect();
    let w = ProjectionMatrix::new(DMatrix::from_columns(&cols))?;

    Ok(TrainedModel {
        projection: w,
        mean_vector: data.mean_vector().clone(),
        config: MethodConfig::Baseline(BaselineConfig {
            heat_sigma: config.heat_sigma,
            ..config.clone()
        }),
        objective_trace: vec![eig.values[..solved].iter().sum::<f64>().max(0.0)],
        iterations_run: 0,
        converged: true,
    })
}

struct Span {
    /// Orthonormal basis of the range of `X D X^T`.
    basis: DMatrix<f64>,
    /// Orthonormal basis of its complement, smallest eigenvalue first.
    complement: DMatrix<f64>,
    reduced_a: DMatrix<f64>,
    reduced_b: DMatrix<f64>,
}

fn restrict_to_span(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Span> {
    let eig = linalg::symmetric_eigen(b)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let (keep, drop): (Vec<usize>, Vec<usize>) =
        (0..eig.values.len()).partition(|&c| eig.values[c] > SPAN_REL_TOL * top);
    if keep.is_empty() {
        return Err(Error::Numerical("training data has zero spread".into()));
    }
    let u = eig.vectors.select_columns(&keep);
    let ra = u.transpose() * a * &u;
    let rb = u.transpose() * b * &u;
    Ok(Span {
        complement: eig.vectors.select_columns(&drop),
        basis: u,
        reduced_a: (&ra + ra.transpose()) * 0.5,
        reduced_b: (&rb + rb.transpose()) * 0.5,
    })
}

pub fn train_baseline(dataset: &Dataset, config: &BaselineConfig) -> Result<TrainedModel> {
    match config.method {
        BaselineMethod::Pca => train_pca(dataset, config.d_prime),
        BaselineMethod::Lpp => train_lpp(dataset, config),
    }
}

/// `X D X^T` of the LPP graph for `data` (centered as training would).
pub fn lpp_degree_form(dataset: &Dataset, config: &BaselineConfig) -> Result<DMatrix<f64>> {
    let data = centered(dataset)?;
    let (edges, _) = heat_kernel_edges(&data, config.k, config.heat_sigma)?;
    let mut degree = vec![0.0; data.n()];
    for &(i, j, w) in &edges {
        degree[i] += w;
        degree[j] += w;
    }
    let mut weighted = data.samples().clone();
    for (mut col, &dg) in weighted.column_iter_mut().zip(&degree) {
        col *= dg.sqrt();
    }
    Ok(&weighted * weighted.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pca_finds_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let t = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let s = t.sample(&mut rng);
                vec![s + noise.sample(&mut rng), s + noise.sample(&mut rng)]
            })
            .collect();
        let ds = Dataset::from_row_vecs(&rows, vec![0; 200]).unwrap();
        let m = train_pca(&ds, 1).unwrap();
        let w = m.projection.column_vecs().remove(0);
        let cos = (w[0] + w[1]) / 2f64.sqrt();
        assert!(cos.abs().min(1.0).acos() < 1e-2);
    }

    #[test]
    fn full_rank_pca_captures_all_variance() {
        let ds = synthetic::gaussian_classes(1, 50, 6, 0.0, 4);
        let m = train_pca(&ds, 6).unwrap();
        let c = dataio::center(&ds).unwrap();
        let total = covariance(&c).trace();
        assert!((captured_variance(&c, &m.projection) - total).abs() < 1e-8 * total);
    }

    #[test]
    fn low_rank_data_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = synthetic::random_orthonormal(&mut rng, 8, 3);
        let t = Normal::new(0.0, 2.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let z = DVector::from_fn(3, |_, _| t.sample(&mut rng));
                (basis.matrix() * z).iter().copied().collect()
            })
            .collect();
        let ds = Dataset::from_row_vecs(&rows, vec![0; 40]).unwrap();
        let m = train_pca(&ds, 3).unwrap();
        let w = m.projection.matrix();
        let mut lost = 0.0;
        let mut energy = 0.0;
        for r in &rows {
            let x = DVector::from_column_slice(r) - &m.mean_vector;
            let rec = w * (w.transpose() * &x);
            lost += (&x - rec).norm_squared();
            energy += x.norm_squared();
        }
        assert!(lost < 1e-8 * energy);
    }

    #[test]
    fn pca_beats_random_subspaces() {
        let ds = synthetic::gaussian_classes(3, 30, 10, 2.0, 6);
        let c = dataio::center(&ds).unwrap();
        let w = principal_directions(&c, 3).unwrap();
        let best = captured_variance(&c, &w);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = synthetic::random_orthonormal(&mut rng, 10, 3);
            assert!(captured_variance(&c, &q) <= best + 1e-9);
        }
    }

    #[test]
    fn pca_dimension_limit() {
        let ds = synthetic::gaussian_classes(1, 4, 10, 0.0, 1);
        assert!(train_pca(&ds, 4).is_err());
        assert!(train_pca(&ds, 3).is_ok());
    }

    #[test]
    fn lpp_separates_two_clusters() {
        let ds = synthetic::gaussian_classes(2, 20, 10, 12.0, 31);
        let m = train_lpp(&ds, &BaselineConfig::lpp(1, 5)).unwrap();
        let ys: Vec<(f64, u32)> = (0..ds.n())
            .map(|i| (m.project(ds.sample(i)).unwrap()[0], ds.labels()[i]))
            .collect();
        let range = |c: u32| {
            let v: Vec<f64> = ys.iter().filter(|p| p.1 == c).map(|p| p.0).collect();
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (a, b) = (range(0), range(1));
        assert!(a.1 < b.0 || b.1 < a.0, "{a:?} {b:?}");
    }

    #[test]
    fn lpp_generalized_orthogonality() {
        let ds = synthetic::gaussian_classes(3, 20, 6, 3.0, 12);
        let cfg = BaselineConfig::lpp(3, 5);
        let m = train_lpp(&ds, &cfg).unwrap();
        let b = lpp_degree_form(&ds, &cfg).unwrap();
        let w = m.projection.matrix();
        let g = w.transpose() * b * w;
        assert!((g - DMatrix::<f64>::identity(3, 3)).amax() < 1e-6);
    }

    #[test]
    fn lpp_trains_on_disconnected_graph() {
        let ds = synthetic::gaussian_classes(2, 10, 4, 1e3, 3);
        assert!(train_lpp(&ds, &BaselineConfig::lpp(2, 2)).is_ok());
    }

    #[test]
    fn lpp_handles_more_features_than_samples() {
        let ds = synthetic::gaussian_classes(2, 6, 40, 4.0, 3);
        let m = train_lpp(&ds, &BaselineConfig::lpp(3, 3)).unwrap();
        assert!(m.projection.matrix().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lpp_pads_beyond_data_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = synthetic::random_orthonormal(&mut rng, 6, 2);
        let t = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let z = DVector::from_fn(2, |_, _| t.sample(&mut rng));
                (basis.matrix() * z).iter().copied().collect()
            })
            .collect();
        let ds = Dataset::from_row_vecs(&rows, vec![0; 30]).unwrap();
        let m = train_lpp(&ds, &BaselineConfig::lpp(4, 5)).unwrap();
        assert_eq!(m.d_prime(), 4);
        for i in 0..ds.n() {
            let y = m.project(ds.sample(i)).unwrap();
            assert!(y[2].abs() < 1e-8 && y[3].abs() < 1e-8);
        }
    }

    #[test]
    fn heat_sigma_parsing() {
        assert_eq!("auto".parse::<HeatSigma>().unwrap(), HeatSigma::Auto);
        assert_eq!("2.5".parse::<HeatSigma>().unwrap(), HeatSigma::Fixed(2.5));
        assert!("-1".parse::<HeatSigma>().is_err());
        let json = serde_json::to_string(&BaselineConfig::lpp(2, 5)).unwrap();
        assert!(json.contains("\"heat_sigma\":\"auto\""));
        let back: BaselineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, BaselineConfig::lpp(2, 5));
    }
}
