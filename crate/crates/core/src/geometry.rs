//! Point-to-line algebra for the line through two points `y_j`, `y_k`:
//! `L(alpha) = alpha * y_j + (1 - alpha) * y_k`.
//!
//! All distances are squared. `alpha` is never clamped, the line is infinite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which `||y_j - y_k||^2` marks a degenerate line.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Interpolation parameter of the closest point on a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCoefficient(pub f64);

impl LineCoefficient {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `(numerator, denominator)` of the closed-form alpha plus the degeneracy
/// threshold, accumulated in one pass.
#[inline]
fn alpha_terms(yi: &[f64], yj: &[f64], yk: &[f64]) -> (f64, f64, f64) {
    let (mut num, mut den, mut nj, mut nk) = (0.0, 0.0, 0.0, 0.0);
    for ((&i, &j), &k) in yi.iter().zip(yj).zip(yk) {
        let dir = j - k;
        num += (i - k) * dir;
        den += dir * dir;
        nj += j * j;
        nk += k * k;
    }
    (num, den, DEGENERACY_EPS * 1f64.max(nj).max(nk))
}

/// True when the line through `yj` and `yk` is too short to define alpha.
pub fn is_degenerate(yj: &[f64], yk: &[f64]) -> bool {
    let den: f64 = yj.iter().zip(yk).map(|(a, b)| (a - b) * (a - b)).sum();
    den < DEGENERACY_EPS * 1f64.max(sq_norm(yj)).max(sq_norm(yk))
}

/// Alpha minimizing `||y_i - y_k - alpha (y_j - y_k)||^2`, or `None` for a
/// degenerate line. Dimensions are assumed equal.
#[inline]
pub(crate) fn alpha_unchecked(yi: &[f64], yj: &[f64], yk: &[f64]) -> Option<f64> {
    let (num, den, threshold) = alpha_terms(yi, yj, yk);
    (den >= threshold).then(|| num / den)
}

#[inline]
pub(crate) fn sqdist_unchecked(yi: &[f64], yj: &[f64], yk: &[f64]) -> Option<f64> {
    let alpha = alpha_unchecked(yi, yj, yk)?;
    Some(
        yi.iter()
            .zip(yj)
            .zip(yk)
            .map(|((&i, &j), &k)| {
                let r = i - k - alpha * (j - k);
                r * r
            })
            .sum(),
    )
}

pub fn line_alpha(yi: &[f64], yj: &[f64], yk: &[f64]) -> Result<LineCoefficient> {
    check_dims(yi, yj)?;
    check_dims(yi, yk)?;
    let (num, den, threshold) = alpha_terms(yi, yj, yk);
    if den < threshold {
        return Err(Error::DegenerateLine {
            norm_sq: den,
            threshold,
        });
    }
    Ok(LineCoefficient(num / den))
}

/// Squared distance from `yi` to the infinite line through `yj` and `yk`.
pub fn point_line_sqdist(yi: &[f64], yj: &[f64], yk: &[f64]) -> Result<f64> {
    let alpha = line_alpha(yi, yj, yk)?;
    let r = input_space_residual(yi, yj, yk, alpha)?;
    Ok(sq_norm(&r))
}

/// `x_i - x_k - alpha (x_j - x_k)`. With alpha taken from the projected
/// points `W^T x`, `||W^T r||^2` is the projected point-to-line distance.
pub fn input_space_residual(
    xi: &[f64],
    xj: &[f64],
    xk: &[f64],
    alpha: LineCoefficient,
) -> Result<Vec<f64>> {
    check_dims(xi, xj)?;
    check_dims(xi, xk)?;
    if !alpha.0.is_finite() {
        return Err(Error::Numerical(format!("non-finite alpha {}", alpha.0)));
    }
    let mut out = vec![0.0; xi.len()];
    residual_into(xi, xj, xk, alpha.0, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn residual_into(xi: &[f64], xj: &[f64], xk: &[f64], alpha: f64, out: &mut [f64]) {
    for (((o, &i), &j), &k) in out.iter_mut().zip(xi).zip(xj).zip(xk) {
        *o = i - k - alpha * (j - k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d_of_alpha(yi: &[f64], yj: &[f64], yk: &[f64], a: f64) -> f64 {
        yi.iter()
            .zip(yj)
            .zip(yk)
            .map(|((i, j), k)| (i - (j * a + k * (1.0 - a))).powi(2))
            .sum()
    }

    // Golden-section search, independent of the closed form.
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        while hi - lo > 1e-10 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = f(d);
            }
        }
        (lo + hi) / 2.0
    }

    #[test]
    fn endpoint_and_symmetric_alphas() {
        let (yj, yk) = ([1.0, 0.0], [-1.0, 0.0]);
        assert_eq!(line_alpha(&yk, &yj, &yk).unwrap().value(), 0.0);
        assert_eq!(line_alpha(&yj, &yj, &yk).unwrap().value(), 1.0);
        assert_eq!(line_alpha(&[0.0, 1.0], &yj, &yk).unwrap().value(), 0.5);
        assert_eq!(point_line_sqdist(&[0.0, 1.0], &yj, &yk).unwrap(), 1.0);
    }

    #[test]
    fn collinear_point_has_zero_distance() {
        let yj = [0.3, -1.2, 4.0];
        let yk = [1.0, 2.0, -0.5];
        let yi: Vec<f64> = yj.iter().zip(&yk).map(|(j, k)| 2.0 * j - k).collect();
        assert!(point_line_sqdist(&yi, &yj, &yk).unwrap() < 1e-10);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let p = [1.0, 2.0];
        assert!(matches!(
            line_alpha(&[0.0, 0.0], &p, &p),
            Err(Error::DegenerateLine { .. })
        ));
        assert!(matches!(
            line_alpha(&[0.0], &p, &p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(is_degenerate(&[1e6, 0.0], &[1e6 + 1e-4, 0.0]));
        assert!(!is_degenerate(&[0.0, 0.0], &[1e-3, 0.0]));
    }

    #[test]
    fn residual_endpoints() {
        let (xi, xj, xk) = ([1.0, 2.0], [3.0, 5.0], [-1.0, 0.5]);
        let r0 = input_space_residual(&xi, &xj, &xk, LineCoefficient(0.0)).unwrap();
        assert_eq!(r0, vec![2.0, 1.5]);
        let r1 = input_space_residual(&xi, &xj, &xk, LineCoefficient(1.0)).unwrap();
        assert_eq!(r1, vec![-2.0, -3.0]);
    }

    #[test]
    fn alpha_matches_golden_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let dim = rng.gen_range(2..=10);
            let mut v = || {
                (0..dim)
                    .map(|_| rng.gen_range(-5.0..5.0))
                    .collect::<Vec<f64>>()
            };
            let (yi, yj, yk) = (v(), v(), v());
            let alpha = line_alpha(&yi, &yj, &yk).unwrap().value();
            let oracle = golden_min(|a| d_of_alpha(&yi, &yj, &yk, a), -100.0, 100.0);
            assert!((alpha - oracle).abs() < 1e-6, "{alpha} vs {oracle}");
        }
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn pair_symmetry(yi in vec3(), yj in vec3(), yk in vec3()) {
            prop_assume!(!is_degenerate(&yj, &yk));
            let a = line_alpha(&yi, &yj, &yk).unwrap().value();
            let b = line_alpha(&yi, &yk, &yj).unwrap().value();
            prop_assert!((a - (1.0 - b)).abs() < 1e-9 * (1.0 + a.abs()));
            let d1 = point_line_sqdist(&yi, &yj, &yk).unwrap();
            let d2 = point_line_sqdist(&yi, &yk, &yj).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-10 * (1.0 + d1));
        }

        #[test]
        fn scale_and_translation(yi in vec3(), yj in vec3(), yk in vec3(), c in 0.1f64..10.0, t in vec3()) {
            prop_assume!(!is_degenerate(&yj, &yk));
            let a = line_alpha(&yi, &yj, &yk).unwrap().value();
            let d = point_line_sqdist(&yi, &yj, &yk).unwrap();
            let s = |v: &[f64]| v.iter().map(|x| -c * x).collect::<Vec<_>>();
            let a_s = line_alpha(&s(&yi), &s(&yj), &s(&yk)).unwrap().value();
            let d_s = point_line_sqdist(&s(&yi), &s(&yj), &s(&yk)).unwrap();
            prop_assert!((a - a_s).abs() < 1e-9 * (1.0 + a.abs()));
            prop_assert!((d * c * c - d_s).abs() < 1e-9 * (1.0 + d_s));
            let tr = |v: &[f64]| v.iter().zip(&t).map(|(x, y)| x + y).collect::<Vec<_>>();
            let a_t = line_alpha(&tr(&yi), &tr(&yj), &tr(&yk)).unwrap().value();
            let d_t = point_line_sqdist(&tr(&yi), &tr(&yj), &tr(&yk)).unwrap();
            prop_assert!((a - a_t).abs() < 1e-8 * (1.0 + a.abs()));
            prop_assert!((d - d_t).abs() < 1e-8 * (1.0 + d));
        }

        #[test]
        fn optimal_and_bounded(yi in vec3(), yj in vec3(), yk in vec3(), other in -50.0f64..50.0) {
            prop_assume!(!is_degenerate(&yj, &yk));
            let a = line_alpha(&yi, &yj, &yk).unwrap().value();
            let d = point_line_sqdist(&yi, &yj, &yk).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(d_of_alpha(&yi, &yj, &yk, other) >= d_of_alpha(&yi, &yj, &yk, a) - 1e-9);
            prop_assert!(d <= d_of_alpha(&yi, &yj, &yk, 1.0) + 1e-9);
            prop_assert!(d <= d_of_alpha(&yi, &yj, &yk, 0.0) + 1e-9);
        }
    }
}
