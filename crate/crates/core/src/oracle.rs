//! Brute-force interventional expectations by full enumeration of the data.
//!
//! These are the reference values for the Taylor machinery in [`crate::ace`]:
//! no moments, no derivatives, just the network evaluated on every row with
//! the intervened feature pinned.

use ndarray::{Array1, Array2};

use crate::data::{Dataset, SequenceDataset};
use crate::error::{AceError, Result};
use crate::net::{GruNetwork, Network, Override, UnrollTrace};

/// Mean of `net` output `output_index` over every row of `data` with column
/// `i` set to `alpha`.
pub fn enumerate_ie(net: &Network, data: &Dataset, i: usize, alpha: f64, output_index: usize) -> Result<f64> {
    data.check_feature(i)?;
    if data.is_empty() {
        return Err(AceError::EmptyData);
    }
    if output_index >= net.output_dim() {
        return Err(AceError::OutputIndex { index: output_index, outputs: net.output_dim() });
    }
    if !alpha.is_finite() {
        return Err(AceError::NonFinite("intervention value"));
    }
    let mut rows = data.rows.clone();
    rows.column_mut(i).fill(alpha);
    let out = net.forward_batch(&rows)?;
    Ok(pairwise_mean(&out.column(output_index).to_vec()))
}

/// Replays one sequence with `x_i := alpha` at step `t_hat`, through step
/// `t_out`. Data inputs are used up to `t_hat` when outputs feed back as
/// inputs (later inputs are generated); otherwise data supply every step.
pub fn replay(
    rnn: &GruNetwork,
    seq: &Array2<f64>,
    i: usize,
    t_hat: usize,
    t_out: usize,
    alpha: f64,
) -> Result<UnrollTrace> {
    if t_hat > t_out {
        return Err(AceError::Horizon { step: t_hat, horizon: t_out + 1 });
    }
    let steps: Vec<Array1<f64>> = seq.rows().into_iter().map(|r| r.to_owned()).collect();
    let keep = if rnn.outputs_feed_inputs { steps.len().min(t_hat + 1) } else { steps.len() };
    if keep <= t_hat {
        return Err(AceError::SequenceLength { needed: t_hat, available: keep });
    }
    rnn.unroll(&steps[..keep], t_out + 1, &[Override { step: t_hat, feature: i, value: alpha }])
}

/// Mean over sequences of output `output_index` at step `t_out` after
/// replaying each with `x_i := alpha` at step `t_hat`.
pub fn enumerate_ie_recurrent(
    rnn: &GruNetwork,
    data: &SequenceDataset,
    i: usize,
    t_hat: usize,
    t_out: usize,
    alpha: f64,
    output_index: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(AceError::EmptyData);
    }
    if output_index >= rnn.output_dim() {
        return Err(AceError::OutputIndex { index: output_index, outputs: rnn.output_dim() });
    }
    let values = data
        .sequences
        .iter()
        .map(|seq| Ok(replay(rnn, seq, i, t_hat, t_out, alpha)?.outputs[t_out][output_index]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_mean(&values))
}

/// Mean by pairwise summation.
pub(crate) fn pairwise_mean(xs: &[f64]) -> f64 {
    fn sum(xs: &[f64]) -> f64 {
        if xs.len() <= 16 {
            xs.iter().sum()
        } else {
            let (a, b) = xs.split_at(xs.len() / 2);
            sum(a) + sum(b)
        }
    }
    sum(xs) / xs.len() as f64
}
