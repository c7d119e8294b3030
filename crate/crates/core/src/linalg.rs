use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Components smaller than this are treated as zero when fixing signs.
const SIGN_EPS: f64 = 1e-10;

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `c` is the unit eigenvector for `values[c]`.
    pub vectors: DMatrix<f64>,
}

/// Flips `v` so that its first non-negligible component is positive.
pub fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax().max(f64::MIN_POSITIVE);
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SortedEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigen-decomposition of a matrix with non-finite entries".into(),
        ));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigen-decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| fix_sign(eig.eigenvectors.column(i).into_owned()))
        .collect();
    Ok(SortedEigen {
        values,
        vectors: DMatrix::from_columns(&cols),
    })
}

/// `Tr(W^T M W)`.
pub fn trace_quadratic(m: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    (w.transpose() * m * w).trace()
}

/// Largest absolute entry of `W^T W - I`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let gram = w.transpose() * w;
    let k = gram.nrows();
    (gram - DMatrix::<f64>::identity(k, k)).amax()
}
