//! Dense factorizations on `ndarray` matrices, backed by faer.

use faer::{Mat, Side};
use ndarray::{Array1, Array2};

use crate::error::{AceError, Result};

fn to_faer(m: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors as the matching columns.
pub(crate) fn symmetric_eigen(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| AceError::IllConditioned(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| u[(r, order[c])]);
    Ok((values, vectors))
}

/// Thin SVD `m = U diag(s) V^T`, singular values descending.
pub(crate) fn thin_svd(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| AceError::IllConditioned(format!("svd failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((from_faer(svd.U()), values, from_faer(svd.V())))
}

pub(crate) fn singular_values(m: &Array2<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m)
        .singular_values()
        .map_err(|e| AceError::IllConditioned(format!("svd failed: {e:?}")))
}

pub(crate) fn determinant(m: &Array2<f64>) -> f64 {
    to_faer(m).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_sorted_descending() {
        let (vals, vecs) = symmetric_eigen(&array![[2.0, 0.0], [0.0, 5.0]]).unwrap();
        assert_eq!(vals, array![5.0, 2.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_reconstructs() {
        let m = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.5]];
        let (u, s, v) = thin_svd(&m).unwrap();
        let back = u.dot(&Array2::from_diag(&s)).dot(&v.t());
        assert!((&back - &m).iter().all(|d| d.abs() < 1e-12));
        assert!((determinant(&array![[2.0, 1.0], [1.0, 3.0]]) - 5.0).abs() < 1e-12);
    }
}
