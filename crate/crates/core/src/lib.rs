//! Causal attributions for neural networks.
//!
//! A trained network is read as a structural causal model whose input
//! neurons are the causes of its outputs. The average causal effect of
//! setting input `x_i` to `alpha` is the interventional expectation
//! `E[y | do(x_i = alpha)]` minus a baseline, the uniform average of that
//! expectation over the feature's domain.
//!
//! * [`net`]: feedforward and GRU networks with exact derivatives.
//! * [`moments`]: empirical and intervened means and covariances.
//! * [`ace`]: interventional expectations, sweeps, ACE, ICE, saliency, lookback.
//! * [`regressor`]: Bayesian polynomial causal regressors and their baselines.
//! * [`oracle`]: brute-force interventional expectations by full enumeration.
//! * [`train`]: deterministic trainers and the synthetic sequence generator.

pub mod ace;
pub mod data;
pub mod error;
mod linalg;
pub mod moments;
pub mod net;
pub mod oracle;
pub mod regressor;
pub mod report;
pub mod train;

pub use data::{Dataset, Domain, SequenceDataset};
pub use ndarray;
pub use error::{AceError, Checked, Result, Warning};
pub use moments::{empirical_moments, EigenPairs, Moments};
pub use net::{Activation, DenseLayer, GruNetwork, Mechanism, Model, Network};
