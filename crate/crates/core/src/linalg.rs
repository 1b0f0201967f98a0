//! Complex dense matrix helpers built on nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Singular values below `max(rows, cols) * eps * sigma_max` count as zero.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Moore-Penrose pseudo-inverse of a wide or square matrix with full row rank,
/// computed from its SVD.
///
/// Fails with [`Error::Singular`] carrying the smallest singular value when the
/// row rank is deficient.
pub fn pinv_full_row_rank(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if rows > cols {
        return Err(Error::dims("pseudo-inverse (need rows <= cols)", format!("rows <= {cols}"), rows));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let threshold = rank_threshold(rows, cols, sigma_max);
    if !(sigma_min > threshold) {
        return Err(Error::Singular {
            smallest: sigma_min,
            threshold,
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    // A = U S V^H  =>  A^+ = V S^-1 U^H
    let mut v_scaled = v_t.adjoint();
    for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
        col /= Complex64::from(svd.singular_values[j]);
    }
    Ok(v_scaled * u.adjoint())
}

/// Squared Frobenius norm of `a - I`.
pub fn identity_residual(a: &CMatrix) -> f64 {
    let (r, c) = a.shape();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..c {
            let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            acc += (a[(i, j)] - target).norm_sqr();
        }
    }
    acc.sqrt()
}
