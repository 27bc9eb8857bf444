//! Causal regressors: Bayesian polynomial fits to interventional-expectation
//! sweeps.
//!
//! The model is Bayesian linear regression on a polynomial basis with an
//! isotropic Gaussian prior (precision `a`) and Gaussian noise (precision
//! `b`). The polynomial order is chosen by maximizing the marginal
//! likelihood. Inputs are mapped affinely onto `[-1, 1]` before the basis
//! expansion; raw-domain coefficients are recovered for reporting.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Domain;
use crate::error::{AceError, Checked, Result, Warning};
use crate::linalg;

pub const DEFAULT_MAX_ORDER: usize = 10;
pub const FALLBACK_PRIOR_PRECISION: f64 = 1e-4;
pub const FALLBACK_NOISE_PRECISION: f64 = 1e2;

const EVIDENCE_MAX_ITER: usize = 500;
const EVIDENCE_TOL: f64 = 1e-10;
/// Predictive std above this fraction of the expectation range is flagged.
const HIGH_VARIANCE_FRACTION: f64 = 0.1;
/// Points used to scan the fit domain for the largest predictive std.
const VARIANCE_SCAN: usize = 101;

/// Powers `1, u, .., u^order` of the affinely rescaled input
/// `u = 2 (alpha - low) / (high - low) - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyBasis {
    pub order: usize,
    pub domain: Domain,
}

impl PolyBasis {
    pub fn new(order: usize, domain: Domain) -> Result<Self> {
        if !domain.width().is_finite() || domain.width() <= 0.0 {
            return Err(AceError::IllConditioned(format!(
                "alphas span [{}, {}]; need a non-degenerate range",
                domain.low, domain.high
            )));
        }
        Ok(Self { order, domain })
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    pub fn rescale(&self, alpha: f64) -> f64 {
        2.0 * (alpha - self.domain.low) / self.domain.width() - 1.0
    }

    pub fn features(&self, alpha: f64) -> Array1<f64> {
        let u = self.rescale(alpha);
        let mut out = Array1::zeros(self.dim());
        let mut p = 1.0;
        for j in 0..self.dim() {
            out[j] = p;
            p *= u;
        }
        out
    }

    pub fn design(&self, alphas: &[f64]) -> Array2<f64> {
        let mut phi = Array2::zeros((alphas.len(), self.dim()));
        for (i, &a) in alphas.iter().enumerate() {
            phi.row_mut(i).assign(&self.features(a));
        }
        phi
    }

    /// Coefficients in powers of the raw input, given coefficients in powers of `u`.
    pub fn to_raw(&self, scaled: &Array1<f64>) -> Array1<f64> {
        let c1 = 2.0 / self.domain.width();
        let c0 = -2.0 * self.domain.low / self.domain.width() - 1.0;
        let d = scaled.len();
        let mut raw = Array1::zeros(d);
        for (j, &m) in scaled.iter().enumerate() {
            let mut binom = 1.0;
            for k in 0..=j {
                raw[k] += m * binom * c1.powi(k as i32) * c0.powi((j - k) as i32);
                binom = binom * (j - k) as f64 / (k + 1) as f64;
            }
        }
        raw
    }
}

/// Gaussian posterior over the polynomial weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesPosterior {
    pub basis: PolyBasis,
    /// Posterior mean of the coefficients of powers of `u`.
    pub mean: Array1<f64>,
    /// Posterior covariance of the coefficients of powers of `u`.
    pub cov: Array2<f64>,
    pub prior_precision: f64,
    pub noise_precision: f64,
    pub log_evidence: f64,
    /// Sum of squared residuals of the posterior mean.
    pub residual: f64,
    /// Effective number of well-determined parameters.
    pub gamma: f64,
}

impl BayesPosterior {
    pub fn raw_coefficients(&self) -> Array1<f64> {
        self.basis.to_raw(&self.mean)
    }

    pub fn predict(&self, alpha: f64) -> (f64, f64) {
        let phi = self.basis.features(alpha);
        let mean = phi.dot(&self.mean);
        let var = 1.0 / self.noise_precision + phi.dot(&self.cov.dot(&phi));
        (mean, var)
    }
}

fn check_inputs(alphas: &[f64], ys: &[f64]) -> Result<Domain> {
    if alphas.is_empty() {
        return Err(AceError::EmptyData);
    }
    if alphas.len() != ys.len() {
        return Err(AceError::Shape { expected: alphas.len(), got: ys.len() });
    }
    if alphas.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AceError::NonFinite("regression data"));
    }
    let low = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let high = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Domain::new(low, high))
}

/// Spectral form of the design matrix, reused across hyperparameter updates.
struct Design {
    basis: PolyBasis,
    u: Array2<f64>,
    s: Array1<f64>,
    v: Array2<f64>,
    /// `U^T y`
    uty: Array1<f64>,
    y: Array1<f64>,
    phi: Array2<f64>,
}

impl Design {
    fn new(basis: PolyBasis, alphas: &[f64], ys: &[f64]) -> Result<Self> {
        let phi = basis.design(alphas);
        let (u, s, v) = linalg::thin_svd(&phi)?;
        let y = Array1::from(ys.to_vec());
        let uty = u.t().dot(&y);
        Ok(Self { basis, u, s, v, uty, y, phi })
    }

    fn posterior(&self, a: f64, b: f64) -> Result<BayesPosterior> {
        let n = self.y.len() as f64;
        let m_dim = self.basis.dim();
        let r = self.s.len();
        let shrink = self.s.mapv(|s| b * s / (a + b * s * s));
        let mean = self.v.dot(&(&shrink * &self.uty));
        // covariance: V diag(1/(a + b s^2)) V^T plus the null space of Phi at 1/a
        let inv = self.s.mapv(|s| 1.0 / (a + b * s * s));
        let vs = &self.v * &inv;
        let mut cov = vs.dot(&self.v.t());
        if r < m_dim {
            let proj = Array2::<f64>::eye(m_dim) - self.v.dot(&self.v.t());
            cov = cov + proj / a;
        }
        let fitted = self.phi.dot(&mean);
        let residual: f64 = (&self.y - &fitted).mapv(|e| e * e).sum();
        let mm = mean.dot(&mean);
        let log_det: f64 =
            self.s.iter().map(|s| (a + b * s * s).ln()).sum::<f64>() + (m_dim - r) as f64 * a.ln();
        let log_evidence = 0.5 * m_dim as f64 * a.ln() + 0.5 * n * b.ln()
            - 0.5 * b * residual
            - 0.5 * a * mm
            - 0.5 * log_det
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        let gamma = self.s.iter().map(|s| b * s * s / (a + b * s * s)).sum();
        if !log_evidence.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(AceError::IllConditioned(
                "non-finite posterior; rescale alphas to [-1, 1] or lower the order".into(),
            ));
        }
        let _ = &self.u;
        Ok(BayesPosterior {
            basis: self.basis,
            mean,
            cov,
            prior_precision: a,
            noise_precision: b,
            log_evidence,
            residual,
            gamma,
        })
    }
}

/// Conjugate posterior for fixed prior precision `a` and noise precision `b`.
pub fn bayes_fit(alphas: &[f64], ys: &[f64], order: usize, a: f64, b: f64) -> Result<BayesPosterior> {
    let domain = check_inputs(alphas, ys)?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(AceError::IllConditioned(format!("precisions must be positive and finite (a={a}, b={b})")));
    }
    Design::new(PolyBasis::new(order, domain)?, alphas, ys)?.posterior(a, b)
}

/// Log marginal likelihood of the order-`order` polynomial model.
pub fn log_evidence(alphas: &[f64], ys: &[f64], order: usize, a: f64, b: f64) -> Result<f64> {
    Ok(bayes_fit(alphas, ys, order, a, b)?.log_evidence)
}

/// Hyperparameter choice for a fit; `None` means "choose automatically".
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hyper {
    /// Prior precision `a`. Defaults to [`DEFAULT_PRIOR_PRECISION`] divided
    /// by the mean square of the targets.
    pub prior_precision: Option<f64>,
    /// Noise precision `b`. Defaults to the evidence maximizer given `a`.
    pub noise_precision: Option<f64>,
}

/// Prior precision in units of the targets' mean square.
pub const DEFAULT_PRIOR_PRECISION: f64 = 1e-4;

fn mean_square(ys: &[f64]) -> f64 {
    ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64
}

/// Upper bound on the noise precision, relative to the target spread.
fn noise_precision_cap(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    1e12 / var.max(1e-12 * (1.0 + mean_square(ys)))
}

/// Posterior with hyperparameters resolved per [`Hyper`]. The noise
/// precision is found by the evidence fixed-point update `b = (N - gamma) / |r|^2`;
/// if that stalls the fallback constants are used.
pub fn evidence_fit(alphas: &[f64], ys: &[f64], order: usize, hyper: Hyper) -> Result<BayesPosterior> {
    let domain = check_inputs(alphas, ys)?;
    let design = Design::new(PolyBasis::new(order, domain)?, alphas, ys)?;
    let a = hyper.prior_precision.unwrap_or(DEFAULT_PRIOR_PRECISION / mean_square(ys).max(1e-300));
    if let Some(b) = hyper.noise_precision {
        return design.posterior(a, b);
    }
    let cap = noise_precision_cap(ys);
    let n = ys.len() as f64;
    let mut b = 1.0 / mean_square(ys).max(1e-300);
    b = b.min(cap);
    for _ in 0..EVIDENCE_MAX_ITER {
        let post = design.posterior(a, b)?;
        let dof = n - post.gamma;
        let next = if post.residual > 0.0 && dof > 0.0 { (dof / post.residual).min(cap) } else { cap };
        if (next - b).abs() <= EVIDENCE_TOL * b {
            return design.posterior(a, next);
        }
        b = next;
    }
    log::debug!("noise precision iteration stalled at order {order}; using fallback precisions");
    design.posterior(FALLBACK_PRIOR_PRECISION, FALLBACK_NOISE_PRECISION)
}

/// Order in `0..=max_order` with the largest evidence; ties go to the lower
/// order. An order whose residual exceeds ten times that of `max_order` is
/// never returned.
pub fn select_order(alphas: &[f64], ys: &[f64], max_order: usize, hyper: Hyper) -> Result<usize> {
    let fits = (0..=max_order).map(|d| evidence_fit(alphas, ys, d, hyper)).collect::<Result<Vec<_>>>()?;
    Ok(pick_order(&fits, ys))
}

fn pick_order(fits: &[BayesPosterior], ys: &[f64]) -> usize {
    let mut best = 0;
    for (d, f) in fits.iter().enumerate() {
        if f.log_evidence > fits[best].log_evidence {
            best = d;
        }
    }
    let power: f64 = ys.iter().map(|y| y * y).sum();
    let limit = 10.0 * fits[fits.len() - 1].residual + 1e-24 * (1.0 + power);
    if fits[best].residual > limit {
        best = (best..fits.len()).find(|&d| fits[d].residual <= limit).unwrap_or(fits.len() - 1);
    }
    best
}

/// Polynomial causal regressor fitted to one feature's sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalRegressor {
    pub posterior: BayesPosterior,
    pub baseline: f64,
}

impl CausalRegressor {
    /// Selects the order by evidence and fits over the sweep's alphas.
    pub fn fit(alphas: &[f64], ys: &[f64], max_order: usize, hyper: Hyper) -> Result<Checked<Self>> {
        let fits = (0..=max_order).map(|d| evidence_fit(alphas, ys, d, hyper)).collect::<Result<Vec<_>>>()?;
        let order = pick_order(&fits, ys);
        let reg = Self::from_posterior(fits[order].clone());
        let mut warnings = Vec::new();
        if alphas.len() < max_order + 1 {
            warnings.push(Warning::Undersampled { points: alphas.len(), max_order });
        }
        let range = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        let d = reg.domain();
        let max_std = (0..VARIANCE_SCAN)
            .map(|i| d.low + d.width() * i as f64 / (VARIANCE_SCAN - 1) as f64)
            .map(|a| reg.posterior.predict(a).1.sqrt())
            .fold(0.0, f64::max);
        if max_std > HIGH_VARIANCE_FRACTION * range.max(1e-9 * (1.0 + scale)) {
            warnings.push(Warning::HighVariance { max_std, range });
        }
        Ok(Checked::with(reg, warnings))
    }

    pub fn from_posterior(posterior: BayesPosterior) -> Self {
        let baseline = interval_mean(&posterior.mean);
        Self { posterior, baseline }
    }

    pub fn order(&self) -> usize {
        self.posterior.basis.order
    }

    pub fn domain(&self) -> Domain {
        self.posterior.basis.domain
    }

    /// Predictive mean and variance at `alpha`.
    pub fn predict(&self, alpha: f64) -> (f64, f64) {
        self.posterior.predict(alpha)
    }

    pub fn predict_checked(&self, alpha: f64) -> Checked<(f64, f64)> {
        let d = self.domain();
        let warnings = if d.contains(alpha) {
            Vec::new()
        } else {
            vec![Warning::Extrapolation { alpha, low: d.low, high: d.high }]
        };
        Checked::with(self.predict(alpha), warnings)
    }

    /// Uniform average of the predictive mean over the fit domain.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn to_document(&self) -> RegressorDoc {
        let p = &self.posterior;
        RegressorDoc {
            order: self.order(),
            coefficients: p.raw_coefficients().to_vec(),
            scaled_coefficients: p.mean.to_vec(),
            posterior_covariance: p.cov.rows().into_iter().map(|r| r.to_vec()).collect(),
            prior_precision: p.prior_precision,
            noise_precision: p.noise_precision,
            log_evidence: p.log_evidence,
            domain: [self.domain().low, self.domain().high],
            baseline: self.baseline,
        }
    }

    pub fn from_document(doc: &RegressorDoc) -> Result<Self> {
        let basis = PolyBasis::new(doc.order, Domain::new(doc.domain[0], doc.domain[1]))?;
        let m = basis.dim();
        if doc.scaled_coefficients.len() != m || doc.posterior_covariance.len() != m {
            return Err(AceError::Parse("regressor document dimensions do not match its order".into()));
        }
        let cov = Array2::from_shape_vec((m, m), doc.posterior_covariance.iter().flatten().copied().collect())
            .map_err(|e| AceError::Parse(e.to_string()))?;
        let posterior = BayesPosterior {
            basis,
            mean: Array1::from(doc.scaled_coefficients.clone()),
            cov,
            prior_precision: doc.prior_precision,
            noise_precision: doc.noise_precision,
            log_evidence: doc.log_evidence,
            residual: f64::NAN,
            gamma: f64::NAN,
        };
        Ok(Self::from_posterior(posterior))
    }
}

/// `(1/2) ∫_{-1}^{1} Σ m_j u^j du`: only even powers survive.
fn interval_mean(scaled: &Array1<f64>) -> f64 {
    scaled.iter().enumerate().filter(|(j, _)| j % 2 == 0).map(|(j, m)| m / (j + 1) as f64).sum()
}

/// Persisted form of a [`CausalRegressor`].
///
/// `coefficients` are in powers of the raw input; the posterior covariance
/// and `scaled_coefficients` are in powers of the input rescaled to `[-1, 1]`
/// over `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorDoc {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub scaled_coefficients: Vec<f64>,
    pub posterior_covariance: Vec<Vec<f64>>,
    pub prior_precision: f64,
    pub noise_precision: f64,
    pub log_evidence: f64,
    pub domain: [f64; 2],
    pub baseline: f64,
}
