//! Deterministic trainers and the synthetic sequence generator.
//!
//! Plain full-batch gradient descent with a fixed learning rate; the same
//! seed and inputs always produce bit-identical weights.

mod gru;
mod mlp;
mod synth;

use std::io::Write;

use ndarray::Array2;

use crate::data::Domain;
use crate::error::Result;

pub use gru::{gru_accuracy, gru_predict, train_gru, UPDATE_BIAS_INIT};
pub use mlp::{mlp_accuracy, train_mlp};
pub use synth::{synth_sequences, SYNTH_MIN_LEN, SYNTH_NOISE_STD};

/// Loss and accuracy before the update of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub model: T,
    pub log: Vec<EpochLog>,
}

pub fn write_log_csv<W: Write>(w: W, log: &[EpochLog]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "loss", "accuracy"])?;
    for e in log {
        out.write_record([e.epoch.to_string(), e.loss.to_string(), e.accuracy.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Rescales each column to `[0, 1]`; returns the original column ranges.
/// Constant columns map to 0.
pub fn minmax_normalize(x: &Array2<f64>) -> (Array2<f64>, Vec<Domain>) {
    let mut out = x.clone();
    let mut ranges = Vec::with_capacity(x.ncols());
    for mut col in out.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = hi - lo;
        col.mapv_inplace(|v| if w > 0.0 { (v - lo) / w } else { 0.0 });
        ranges.push(Domain::new(lo, hi));
    }
    (out, ranges)
}
