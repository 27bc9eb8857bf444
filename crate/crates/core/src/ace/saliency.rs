//! Saliency maps: the ACE of every input at the value it takes in one instance.

use ndarray::{Array1, Array2};

use super::{ace_at, sweep_feedforward_on, sweep_recurrent_on, InterventionGrid, InterventionSweep, SweepConfig, DEFAULT_NUM};
use crate::data::{Dataset, SequenceDataset};
use crate::error::{AceError, Checked, Result, Warning};
use crate::net::{GruNetwork, Network};
use crate::regressor::{CausalRegressor, Hyper, DEFAULT_MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyConfig {
    pub num: usize,
    pub sweep: SweepConfig,
    /// Fit a causal regressor up to this order; `None` reads ACE off the raw sweep.
    pub max_order: Option<usize>,
    pub hyper: Hyper,
    /// Clamp negative entries to zero.
    pub threshold: bool,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            num: DEFAULT_NUM,
            sweep: SweepConfig::default(),
            max_order: Some(DEFAULT_MAX_ORDER),
            hyper: Hyper::default(),
            threshold: false,
        }
    }
}

fn entry(sweep: Checked<InterventionSweep>, value: f64, cfg: &SaliencyConfig, warnings: &mut Vec<Warning>) -> Result<f64> {
    let mut push = |w: Warning| {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    };
    sweep.warnings.into_iter().for_each(&mut push);
    let sweep = sweep.value;
    let result = match cfg.max_order {
        Some(order) => {
            let reg = CausalRegressor::fit(sweep.alphas(), &sweep.ie, order, cfg.hyper)?;
            reg.warnings.into_iter().for_each(&mut push);
            ace_at(&reg.value, value)
        }
        None => ace_at(&sweep, value),
    };
    result.warnings.into_iter().for_each(&mut push);
    let ace = result.value.ace;
    Ok(if cfg.threshold { ace.max(0.0) } else { ace })
}

/// ACE of each feature at `instance[j]`.
pub fn saliency(
    net: &Network,
    data: &Dataset,
    instance: &Array1<f64>,
    output_index: usize,
    cfg: &SaliencyConfig,
) -> Result<Checked<Array1<f64>>> {
    if instance.len() != data.num_features() {
        return Err(AceError::Shape { expected: data.num_features(), got: instance.len() });
    }
    let mut warnings = Vec::new();
    let mut map = Array1::zeros(instance.len());
    for j in 0..instance.len() {
        let grid = InterventionGrid::new(j, data.domains[j], cfg.num)?;
        let sweep = sweep_feedforward_on(net, data, grid, output_index, &cfg.sweep)?;
        map[j] = entry(sweep, instance[j], cfg, &mut warnings)?;
    }
    Ok(Checked::with(map, warnings))
}

/// `(t_out + 1) x features` map of the ACE of `x_j` at step `t` on the
/// output at step `t_out`, evaluated at the instance's values.
pub fn saliency_recurrent(
    rnn: &GruNetwork,
    data: &SequenceDataset,
    instance: &Array2<f64>,
    t_out: usize,
    output_index: usize,
    cfg: &SaliencyConfig,
) -> Result<Checked<Array2<f64>>> {
    if instance.ncols() != data.num_features() {
        return Err(AceError::Shape { expected: data.num_features(), got: instance.ncols() });
    }
    if instance.nrows() <= t_out {
        return Err(AceError::SequenceLength { needed: t_out, available: instance.nrows() });
    }
    let mut warnings = Vec::new();
    let mut map = Array2::zeros((t_out + 1, instance.ncols()));
    for t in 0..=t_out {
        for j in 0..instance.ncols() {
            let grid = InterventionGrid::new(j, data.domain(t, j)?, cfg.num)?.at_step(t);
            let sweep = sweep_recurrent_on(rnn, data, grid, t_out, output_index, &cfg.sweep)?;
            map[(t, j)] = entry(sweep, instance[(t, j)], cfg, &mut warnings)?;
        }
    }
    Ok(Checked::with(map, warnings))
}
