//! Empirical and intervened first/second moments of the input neurons.
//!
//! Under `do(x_i = alpha)` the other inputs keep their observational
//! distribution, so the intervened moments are the empirical ones with
//! `mu[i] = alpha` and row/column `i` of the covariance zeroed.

use ndarray::{Array1, Array2, Axis};

use crate::data::Dataset;
use crate::error::{AceError, Result};
use crate::linalg;

/// Largest tolerated asymmetry before eigendecomposition.
const SYMMETRY_TOL: f64 = 1e-9;
/// Negative eigenvalues above `-PSD_TOL * trace` are clamped to zero.
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mu: Array1<f64>,
    /// Population (1/n) covariance.
    pub cov: Array2<f64>,
    pub intervened_on: Option<(usize, f64)>,
}

impl Moments {
    pub fn new(mu: Array1<f64>, cov: Array2<f64>) -> Result<Self> {
        let k = mu.len();
        if cov.dim() != (k, k) {
            return Err(AceError::Shape { expected: k, got: cov.nrows() });
        }
        if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("moments"));
        }
        Ok(Self { mu, cov, intervened_on: None })
    }

    /// Sample mean and 1/n covariance of the rows of `rows`.
    pub fn from_rows(rows: &Array2<f64>) -> Result<Self> {
        let n = rows.nrows();
        if n == 0 {
            return Err(AceError::EmptyData);
        }
        let mu = rows.mean_axis(Axis(0)).expect("non-empty");
        let centered = rows - &mu;
        let mut cov = centered.t().dot(&centered) / n as f64;
        // the product is symmetric in exact arithmetic
        let k = cov.nrows();
        for i in 0..k {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        Self::new(mu, cov)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Moments under `do(x_i = alpha)`.
    pub fn intervene(&self, i: usize, alpha: f64) -> Result<Self> {
        if i >= self.dim() {
            return Err(AceError::FeatureIndex { index: i, features: self.dim() });
        }
        if let Some((j, _)) = self.intervened_on {
            return Err(AceError::AlreadyIntervened(j));
        }
        if !alpha.is_finite() {
            return Err(AceError::NonFinite("intervention value"));
        }
        let mut out = self.clone();
        out.mu[i] = alpha;
        out.cov.row_mut(i).fill(0.0);
        out.cov.column_mut(i).fill(0.0);
        out.intervened_on = Some((i, alpha));
        Ok(out)
    }

    /// Eigendecomposition of the covariance with PSD repair.
    pub fn eigendecompose(&self) -> Result<EigenPairs> {
        let asym = self
            .cov
            .indexed_iter()
            .map(|((i, j), v)| (v - self.cov[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym > SYMMETRY_TOL {
            return Err(AceError::Asymmetric(asym));
        }
        let (mut values, vectors) = linalg::symmetric_eigen(&self.cov)?;
        let trace = self.cov.diag().sum();
        let floor = -PSD_TOL * trace.abs().max(f64::MIN_POSITIVE);
        for v in values.iter_mut() {
            if *v < floor {
                return Err(AceError::NotPsd(*v));
            }
            *v = v.max(0.0);
        }
        Ok(EigenPairs { values, vectors })
    }
}

/// `empirical_moments` of a dataset: mean and 1/n covariance.
pub fn empirical_moments(data: &Dataset) -> Result<Moments> {
    Moments::from_rows(&data.rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Descending, clamped to be non-negative.
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Array2<f64>,
}

impl EigenPairs {
    /// Columns `sqrt(lambda_r) e_r` for every strictly positive eigenvalue.
    pub fn scaled_directions(&self) -> Array2<f64> {
        let keep: Vec<usize> = (0..self.values.len()).filter(|&r| self.values[r] > 0.0).collect();
        let k = self.vectors.nrows();
        Array2::from_shape_fn((k, keep.len()), |(i, c)| {
            let r = keep[c];
            self.values[r].sqrt() * self.vectors[(i, r)]
        })
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values;
        scaled.dot(&self.vectors.t())
    }
}
