//! Lookback: how many steps back an output still depends on its inputs.

use ndarray::{Array1, Array2};

use crate::data::SequenceDataset;
use crate::error::{AceError, Result};
use crate::linalg;
use crate::net::GruNetwork;

pub const DEFAULT_TAU_TOL: f64 = 1e-8;

/// Scalar summary of a Jacobian block used to decide dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependenceMeasure {
    /// `|det J|`, for square blocks.
    Determinant,
    /// Smallest singular value, for non-square blocks.
    SmallestSingularValue,
    /// `max |dJ|`, for a single output row.
    SupNorm,
}

impl DependenceMeasure {
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        if rows == 1 {
            DependenceMeasure::SupNorm
        } else if rows == cols {
            DependenceMeasure::Determinant
        } else {
            DependenceMeasure::SmallestSingularValue
        }
    }

    pub fn evaluate(self, jac: &Array2<f64>) -> Result<f64> {
        Ok(match self {
            DependenceMeasure::SupNorm => jac.iter().fold(0.0, |m, v| m.max(v.abs())),
            DependenceMeasure::Determinant => linalg::determinant(jac).abs(),
            DependenceMeasure::SmallestSingularValue => {
                linalg::singular_values(jac)?.into_iter().fold(f64::INFINITY, f64::min)
            }
        })
    }
}

/// Largest lag `k <= t` whose Jacobian block `d y^t / d x^(t-k)` has a
/// dependence measure above `tol`; 0 if none does. `output_index` restricts
/// the block to one output row.
pub fn lookback(rnn: &GruNetwork, seq: &[Array1<f64>], t: usize, output_index: Option<usize>, tol: f64) -> Result<usize> {
    if let Some(o) = output_index {
        if o >= rnn.output_dim() {
            return Err(AceError::OutputIndex { index: o, outputs: rnn.output_dim() });
        }
    }
    for lag in (1..=t).rev() {
        let full = rnn.output_input_jacobian(seq, t, lag)?;
        let jac = match output_index {
            Some(o) => full.row(o).insert_axis(ndarray::Axis(0)).to_owned(),
            None => full,
        };
        let measure = DependenceMeasure::for_shape(jac.nrows(), jac.ncols()).evaluate(&jac)?;
        if measure > tol {
            return Ok(lag);
        }
    }
    Ok(0)
}

/// Rounded mean of [`lookback`] over every sequence reaching step `t`.
pub fn tau(rnn: &GruNetwork, data: &SequenceDataset, t: usize, output_index: Option<usize>, tol: f64) -> Result<usize> {
    if data.is_empty() {
        return Err(AceError::EmptyData);
    }
    let lags = (0..data.len())
        .filter(|&s| data.sequences[s].nrows() > t)
        .map(|s| lookback(rnn, &data.steps(s), t, output_index, tol))
        .collect::<Result<Vec<_>>>()?;
    if lags.is_empty() {
        let longest = data.sequences.iter().map(|s| s.nrows()).max().unwrap_or(0);
        return Err(AceError::SequenceLength { needed: t, available: longest });
    }
    Ok((lags.iter().sum::<usize>() as f64 / lags.len() as f64).round() as usize)
}
