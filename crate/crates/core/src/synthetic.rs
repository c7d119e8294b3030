//! Seeded synthetic datasets for tests, benchmarks and demos.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::Dataset;
use crate::model::ProjectionMatrix;

/// Random `d x k` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng>(rng: &mut R, d: usize, k: usize) -> ProjectionMatrix {
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    ProjectionMatrix::new(q.columns(0, k).into_owned()).expect("k <= d")
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `classes` isotropic unit-variance Gaussian blobs in `d` dimensions whose
/// means sit at distance `separation` from the origin along random
/// directions.
pub fn gaussian_classes(
    classes: usize,
    per_class: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x * separation / norm).collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(mean.iter().map(|m| m + gaussian(&mut rng)).collect());
            labels.push(c as u32);
        }
    }
    Dataset::from_row_vecs(&rows, labels).expect("valid synthetic data")
}

/// Parameters of [`manifold_benchmark`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSpec {
    pub classes: usize,
    pub per_class: usize,
    pub ambient_dim: usize,
    /// Standard deviation of noise in the intrinsic coordinates, applied
    /// before embedding.
    pub latent_noise: f64,
    /// Standard deviation of isotropic noise added in every ambient
    /// dimension after embedding.
    pub ambient_noise: f64,
    pub seed: u64,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        ManifoldSpec {
            classes: 3,
            per_class: 50,
            ambient_dim: 50,
            latent_noise: 0.05,
            ambient_noise: 0.0,
            seed: 2014,
        }
    }
}

/// Classes sampled from noisy curved 2-D sheets, isometrically embedded in
/// `ambient_dim` dimensions.
///
/// Intrinsic coordinates are `(3u, 3v, b_c sin(pi u), e_c)` with `u, v`
/// uniform on `[-1, 1]`, a class-specific bend `b_c` and a unit class
/// offset `e_c` along its own axis. Every class shares the large sheet
/// directions, so the dominant variance is common to all classes.
pub fn manifold_benchmark(spec: &ManifoldSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.ambient_dim;
    // latent coordinates: 0,1 span the sheet, 2 bends it, 3.. carry class offsets
    let latent = 3 + spec.classes;
    let basis = random_orthonormal(&mut rng, d, latent.min(d));
    let b = basis.matrix();
    let mut rows = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for c in 0..spec.classes {
        let bend = 1.0 + 0.5 * c as f64;
        for _ in 0..spec.per_class {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            let mut z = vec![0.0; latent];
            z[0] = 3.0 * u;
            z[1] = 3.0 * v;
            z[2] = bend * (std::f64::consts::PI * u).sin();
            if 3 + c < latent {
                z[3 + c] = 1.0;
            }
            for zl in z.iter_mut() {
                *zl += spec.latent_noise * gaussian(&mut rng);
            }
            let mut x = vec![0.0; d];
            for (r, xr) in x.iter_mut().enumerate() {
                *xr = (0..latent.min(d)).map(|l| b[(r, l)] * z[l]).sum::<f64>()
                    + spec.ambient_noise * gaussian(&mut rng);
            }
            rows.push(x);
            labels.push(c as u32);
        }
    }
    Dataset::from_row_vecs(&rows, labels).expect("valid synthetic data")
}
