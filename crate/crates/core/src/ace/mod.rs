//! Interventional expectations, sweeps over an intervention grid, and the
//! attributions built from them.
//!
//! A sweep evaluates `E[y | do(x_i = alpha)]` on an evenly spaced grid over
//! the feature's domain. The average causal effect at `alpha` is that
//! expectation minus its uniform average over the domain, taken either from
//! the sweep itself or from a fitted [`CausalRegressor`].

mod expectation;
mod saliency;
mod tau;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::data::{Dataset, Domain, SequenceDataset};
use crate::error::{AceError, Checked, Result, Warning};
use crate::moments::{empirical_moments, Moments};
use crate::net::{GruNetwork, Network, UnrolledOutput, DEFAULT_DSD_EPS, DEFAULT_HESSIAN_CAP};
use crate::oracle;
use crate::regressor::CausalRegressor;

pub use expectation::{ie_approx, ie_approx_default, ie_exact, taylor_directional, taylor_exact, Directions};
pub use saliency::{saliency, saliency_recurrent, SaliencyConfig};
pub use tau::{lookback, tau, DependenceMeasure, DEFAULT_TAU_TOL};

pub const DEFAULT_NUM: usize = 50;

/// Evenly spaced intervention values for one feature (and, for sequences,
/// one step).
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionGrid {
    pub feature: usize,
    pub step: Option<usize>,
    pub domain: Domain,
    pub alphas: Vec<f64>,
}

impl InterventionGrid {
    /// `num` points from `domain.low` to `domain.high` inclusive.
    pub fn new(feature: usize, domain: Domain, num: usize) -> Result<Self> {
        if num < 2 {
            return Err(AceError::GridSize(num));
        }
        if !(domain.low.is_finite() && domain.high.is_finite()) {
            return Err(AceError::NonFinite("domain bound"));
        }
        if domain.high <= domain.low {
            return Err(AceError::DegenerateDomain { low: domain.low, high: domain.high });
        }
        let step = domain.width() / (num - 1) as f64;
        let mut alphas: Vec<f64> = (0..num).map(|j| domain.low + step * j as f64).collect();
        alphas[num - 1] = domain.high;
        Ok(Self { feature, step: None, domain, alphas })
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step = Some(step);
        self
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// How each interventional expectation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Second-order expansion with the exact Hessian.
    ExactTaylor,
    /// Second-order expansion with directional second differences.
    ApproxDirectional,
    /// Full enumeration of the data, no expansion.
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExactTaylor => "exact_taylor",
            Method::ApproxDirectional => "approx_directional",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_taylor" => Ok(Method::ExactTaylor),
            "approx" | "approx_directional" => Ok(Method::ApproxDirectional),
            "oracle" => Ok(Method::Oracle),
            other => Err(AceError::Parse(format!("unknown method `{other}` (exact, approx, oracle)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub method: Method,
    /// Step for directional second differences.
    pub eps: f64,
    /// Widest input for which an exact Hessian is formed; wider mechanisms
    /// fall back to directional differences.
    pub hessian_cap: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { method: Method::ExactTaylor, eps: DEFAULT_DSD_EPS, hessian_cap: DEFAULT_HESSIAN_CAP }
    }
}

impl SweepConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Interventional expectations along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSweep {
    pub grid: InterventionGrid,
    pub ie: Vec<f64>,
    pub method: Method,
    pub output_index: usize,
}

impl InterventionSweep {
    pub fn alphas(&self) -> &[f64] {
        &self.grid.alphas
    }

    /// Linear interpolation of the sweep, extended linearly past its ends.
    pub fn interpolate(&self, alpha: f64) -> f64 {
        let xs = &self.grid.alphas;
        let j = xs.partition_point(|&x| x <= alpha).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[j - 1], xs[j]);
        let t = (alpha - x0) / (x1 - x0);
        self.ie[j - 1] + t * (self.ie[j] - self.ie[j - 1])
    }

    /// Trapezoidal mean of the sweep over its domain.
    pub fn trapezoid_mean(&self) -> f64 {
        let xs = &self.grid.alphas;
        let area: f64 = (1..xs.len()).map(|j| 0.5 * (xs[j] - xs[j - 1]) * (self.ie[j] + self.ie[j - 1])).sum();
        area / (xs[xs.len() - 1] - xs[0])
    }
}

fn finish(
    grid: InterventionGrid,
    results: Vec<Result<Checked<f64>>>,
    method: Method,
    output_index: usize,
) -> Result<Checked<InterventionSweep>> {
    let mut ie = Vec::with_capacity(results.len());
    let mut warnings: Vec<Warning> = Vec::new();
    for r in results {
        let c = r?;
        if !c.value.is_finite() {
            return Err(AceError::NonFinite("interventional expectation"));
        }
        for w in c.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        ie.push(c.value);
    }
    Ok(Checked::with(InterventionSweep { grid, ie, method, output_index }, warnings))
}

/// Sweep of feature `i` over its dataset domain.
pub fn sweep_feedforward(
    net: &Network,
    data: &Dataset,
    i: usize,
    num: usize,
    output_index: usize,
    method: Method,
) -> Result<Checked<InterventionSweep>> {
    data.check_feature(i)?;
    let grid = InterventionGrid::new(i, data.domains[i], num)?;
    sweep_feedforward_on(net, data, grid, output_index, &SweepConfig::with_method(method))
}

/// Sweep over an explicit grid. Moments are computed once; with directional
/// differences so is the eigendecomposition, since intervening on `x_i`
/// changes only the mean across the grid.
pub fn sweep_feedforward_on(
    net: &Network,
    data: &Dataset,
    grid: InterventionGrid,
    output_index: usize,
    cfg: &SweepConfig,
) -> Result<Checked<InterventionSweep>> {
    let i = grid.feature;
    data.check_feature(i)?;
    let mech = expectation::output(net, output_index)?;
    let mut method = cfg.method;
    if method == Method::ExactTaylor && net.input_dim() > cfg.hessian_cap {
        log::info!(
            "{} inputs exceed the Hessian cap {}; using directional differences",
            net.input_dim(),
            cfg.hessian_cap
        );
        method = Method::ApproxDirectional;
    }
    let results: Vec<Result<Checked<f64>>> = match method {
        Method::Oracle => grid
            .alphas
            .par_iter()
            .map(|&a| oracle::enumerate_ie(net, data, i, a, output_index).map(Checked::clean))
            .collect(),
        Method::ExactTaylor => {
            let moments = empirical_moments(data)?;
            grid.alphas
                .par_iter()
                .map(|&a| taylor_exact(&mech, &moments.intervene(i, a)?, cfg.hessian_cap))
                .collect()
        }
        Method::ApproxDirectional => {
            let moments = empirical_moments(data)?;
            let first = moments.intervene(i, grid.alphas[0])?;
            let dirs = Directions::of(&first)?;
            grid.alphas
                .par_iter()
                .map(|&a| {
                    let mut mu = moments.mu.clone();
                    mu[i] = a;
                    taylor_directional(&mech, &mu, &dirs, cfg.eps)
                })
                .collect()
        }
    };
    finish(grid, results, method, output_index)
}

/// Moments of the flattened input window `0..=t_out` over every sequence
/// replayed with `x_i := alpha` at step `t_hat`, intervened on that slot.
pub fn replayed_moments(
    rnn: &GruNetwork,
    data: &SequenceDataset,
    i: usize,
    t_hat: usize,
    t_out: usize,
    alpha: f64,
) -> Result<Moments> {
    let d = rnn.input_dim();
    let width = (t_out + 1) * d;
    let mut rows = Array2::zeros((data.len(), width));
    for (s, seq) in data.sequences.iter().enumerate() {
        let trace = oracle::replay(rnn, seq, i, t_hat, t_out, alpha)?;
        rows.row_mut(s).assign(&trace.flat_inputs(t_out + 1));
    }
    Moments::from_rows(&rows)?.intervene(t_hat * d + i, alpha)
}

/// Sweep of feature `i` at step `t_hat` over its domain, read at output step `t_out`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_recurrent(
    rnn: &GruNetwork,
    data: &SequenceDataset,
    i: usize,
    t_hat: usize,
    t_out: usize,
    num: usize,
    output_index: usize,
    method: Method,
) -> Result<Checked<InterventionSweep>> {
    let grid = InterventionGrid::new(i, data.domain(t_hat, i)?, num)?.at_step(t_hat);
    sweep_recurrent_on(rnn, data, grid, t_out, output_index, &SweepConfig::with_method(method))
}

pub fn sweep_recurrent_on(
    rnn: &GruNetwork,
    data: &SequenceDataset,
    grid: InterventionGrid,
    t_out: usize,
    output_index: usize,
    cfg: &SweepConfig,
) -> Result<Checked<InterventionSweep>> {
    let i = grid.feature;
    let t_hat = grid.step.unwrap_or(t_out);
    if i >= rnn.input_dim() {
        return Err(AceError::FeatureIndex { index: i, features: rnn.input_dim() });
    }
    if output_index >= rnn.output_dim() {
        return Err(AceError::OutputIndex { index: output_index, outputs: rnn.output_dim() });
    }
    if t_hat > t_out {
        return Err(AceError::Horizon { step: t_hat, horizon: t_out + 1 });
    }
    let mech = UnrolledOutput { rnn, steps: t_out + 1, index: output_index };
    let mut method = cfg.method;
    if method == Method::ExactTaylor && (t_out + 1) * rnn.input_dim() > cfg.hessian_cap {
        method = Method::ApproxDirectional;
    }
    let results: Vec<Result<Checked<f64>>> = grid
        .alphas
        .par_iter()
        .map(|&a| match method {
            Method::Oracle => {
                oracle::enumerate_ie_recurrent(rnn, data, i, t_hat, t_out, a, output_index).map(Checked::clean)
            }
            Method::ExactTaylor => taylor_exact(&mech, &replayed_moments(rnn, data, i, t_hat, t_out, a)?, cfg.hessian_cap),
            Method::ApproxDirectional => {
                let m = replayed_moments(rnn, data, i, t_hat, t_out, a)?;
                taylor_directional(&mech, &m.mu, &Directions::of(&m)?, cfg.eps)
            }
        })
        .collect();
    finish(grid, results, method, output_index)
}

/// Anything that yields `E[y | do(x_i = alpha)]` over a domain.
pub trait AceModel {
    fn domain(&self) -> Domain;
    /// Expectation at `alpha` and, when available, its predictive variance.
    fn expectation(&self, alpha: f64) -> (f64, Option<f64>);
    /// Uniform average of the expectation over the domain.
    fn baseline(&self) -> f64;
}

impl AceModel for InterventionSweep {
    fn domain(&self) -> Domain {
        self.grid.domain
    }

    fn expectation(&self, alpha: f64) -> (f64, Option<f64>) {
        (self.interpolate(alpha), None)
    }

    fn baseline(&self) -> f64 {
        self.trapezoid_mean()
    }
}

impl AceModel for CausalRegressor {
    fn domain(&self) -> Domain {
        CausalRegressor::domain(self)
    }

    fn expectation(&self, alpha: f64) -> (f64, Option<f64>) {
        let (m, v) = self.predict(alpha);
        (m, Some(v))
    }

    fn baseline(&self) -> f64 {
        CausalRegressor::baseline(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceResult {
    pub alpha: f64,
    pub ie: f64,
    pub baseline: f64,
    pub ace: f64,
    pub predictive_variance: Option<f64>,
}

/// Distribution a doer draws intervention values from when forming the baseline.
#[derive(Clone, Default)]
pub enum Doer {
    /// Every value in the domain equally likely.
    #[default]
    Uniform,
    /// Unnormalized density over the domain.
    Weighted(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Doer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Doer::Uniform => f.write_str("Uniform"),
            Doer::Weighted(_) => f.write_str("Weighted(..)"),
        }
    }
}

/// Panels for composite Simpson integration of weighted baselines.
const DOER_PANELS: usize = 1024;

impl Doer {
    /// Baseline of `model` under this doer.
    pub fn baseline<M: AceModel + ?Sized>(&self, model: &M) -> f64 {
        match self {
            Doer::Uniform => model.baseline(),
            Doer::Weighted(w) => {
                let d = model.domain();
                let h = d.width() / DOER_PANELS as f64;
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..=DOER_PANELS {
                    let x = d.low + h * j as f64;
                    let c = if j == 0 || j == DOER_PANELS { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    let wx = w(x);
                    num += c * wx * model.expectation(x).0;
                    den += c * wx;
                }
                num / den
            }
        }
    }
}

/// `ACE(alpha) = E[y | do(x_i = alpha)] - baseline` under a uniform doer.
pub fn ace_at<M: AceModel + ?Sized>(model: &M, alpha: f64) -> Checked<AceResult> {
    ace_at_with(model, alpha, &Doer::Uniform)
}

pub fn ace_at_with<M: AceModel + ?Sized>(model: &M, alpha: f64, doer: &Doer) -> Checked<AceResult> {
    let (ie, var) = model.expectation(alpha);
    let baseline = doer.baseline(model);
    let d = model.domain();
    let warnings = if d.contains(alpha) {
        Vec::new()
    } else {
        vec![Warning::Extrapolation { alpha, low: d.low, high: d.high }]
    };
    Checked::with(AceResult { alpha, ie, baseline, ace: ie - baseline, predictive_variance: var }, warnings)
}

/// Individual causal effect `f(u with u_i := alpha) - f(u)`.
pub fn ice(net: &Network, u: &Array1<f64>, i: usize, alpha: f64, output_index: usize) -> Result<f64> {
    if i >= u.len() {
        return Err(AceError::FeatureIndex { index: i, features: u.len() });
    }
    expectation::output(net, output_index)?;
    let mut v = u.clone();
    v[i] = alpha;
    let pts = ndarray::stack![ndarray::Axis(0), u.view(), v.view()];
    let y = net.forward_batch(&pts)?;
    Ok(y[(1, output_index)] - y[(0, output_index)])
}

#[cfg(test)]
mod tests;
