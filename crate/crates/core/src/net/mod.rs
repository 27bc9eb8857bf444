//! Networks as differentiable causal mechanisms.

mod activation;
mod dense;
pub mod fixtures;
mod format;
mod gru;
pub mod tape;

pub use activation::Activation;
pub use dense::{DenseLayer, Network, DEFAULT_DSD_EPS, DEFAULT_HESSIAN_CAP};
pub use format::Model;
pub use gru::{GateWeights, GruNetwork, Override, UnrollTrace};

pub(crate) use activation::sigmoid;
pub(crate) use dense::cancellation_warning;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Checked, Result};

/// A scalar function of a flat input vector: one output neuron of a network,
/// or of an unrolled recurrent network at a fixed step.
pub trait Mechanism: Sync {
    fn input_dim(&self) -> usize;
    fn is_smooth(&self) -> bool;
    fn value(&self, x: ArrayView1<f64>) -> Result<f64>;
    fn hessian(&self, x: ArrayView1<f64>, cap: usize) -> Result<Checked<Array2<f64>>>;

    /// Values at every row of `xs`.
    fn values(&self, xs: &Array2<f64>) -> Result<Array1<f64>> {
        xs.rows().into_iter().map(|r| self.value(r)).collect()
    }
}

/// Output `index` of a feedforward [`Network`].
#[derive(Debug, Clone, Copy)]
pub struct NetOutput<'a> {
    pub net: &'a Network,
    pub index: usize,
}

impl Mechanism for NetOutput<'_> {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn is_smooth(&self) -> bool {
        self.net.is_smooth()
    }

    fn value(&self, x: ArrayView1<f64>) -> Result<f64> {
        let y = self.net.forward(x)?;
        y.get(self.index)
            .copied()
            .ok_or(crate::AceError::OutputIndex { index: self.index, outputs: y.len() })
    }

    fn hessian(&self, x: ArrayView1<f64>, cap: usize) -> Result<Checked<Array2<f64>>> {
        self.net.hessian_capped(x, self.index, cap)
    }

    fn values(&self, xs: &Array2<f64>) -> Result<Array1<f64>> {
        if self.index >= self.net.output_dim() {
            return Err(crate::AceError::OutputIndex { index: self.index, outputs: self.net.output_dim() });
        }
        Ok(self.net.forward_batch(xs)?.column(self.index).to_owned())
    }
}

/// Output `index` at the last of `steps` steps of a teacher-forced unrolled
/// recurrent network; inputs are the `steps * input_dim` slots, step-major.
#[derive(Debug, Clone, Copy)]
pub struct UnrolledOutput<'a> {
    pub rnn: &'a GruNetwork,
    pub steps: usize,
    pub index: usize,
}

impl Mechanism for UnrolledOutput<'_> {
    fn input_dim(&self) -> usize {
        self.steps * self.rnn.input_dim()
    }

    fn is_smooth(&self) -> bool {
        self.rnn.is_smooth()
    }

    fn value(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.rnn.unrolled_output(x, self.steps, self.index)
    }

    fn hessian(&self, x: ArrayView1<f64>, cap: usize) -> Result<Checked<Array2<f64>>> {
        self.rnn.unrolled_hessian(x, self.steps, self.index, cap)
    }
}
