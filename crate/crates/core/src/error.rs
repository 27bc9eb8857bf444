use thiserror::Error;

/// Errors raised by the attribution engine.
#[derive(Debug, Error)]
pub enum AceError {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("output index {index} out of range for {outputs} outputs")]
    OutputIndex { index: usize, outputs: usize },

    #[error("feature index {index} out of range for {features} features")]
    FeatureIndex { index: usize, features: usize },

    #[error("hessian over {inputs} inputs exceeds the cap of {cap}; use the directional approximation")]
    HessianCap { inputs: usize, cap: usize },

    #[error("empty dataset")]
    EmptyData,

    #[error("moments are already intervened on feature {0}")]
    AlreadyIntervened(usize),

    #[error("covariance is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),

    #[error("covariance is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("degenerate domain [{low}, {high}]")]
    DegenerateDomain { low: f64, high: f64 },

    #[error("intervention grid needs at least 2 points, got {0}")]
    GridSize(usize),

    #[error("sequence too short: step {needed} requested, {available} available")]
    SequenceLength { needed: usize, available: usize },

    #[error("lag {lag} out of range for step {step}")]
    LagOutOfRange { lag: usize, step: usize },

    #[error("step {step} is beyond horizon {horizon}")]
    Horizon { step: usize, horizon: usize },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("training diverged at epoch {0}")]
    Divergence(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AceError>;

/// Non-fatal conditions attached to a numerical result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Second-order quantity computed on a network with relu units.
    NonSmooth,
    /// Evaluation point sits exactly on a relu kink; the left derivative was used.
    Kink,
    /// Finite-difference cancellation error may dominate the estimate.
    Cancellation { bound: f64 },
    /// Query lies outside the fitted or observed domain.
    Extrapolation { alpha: f64, low: f64, high: f64 },
    /// Predictive spread of a causal regressor is large relative to its range.
    HighVariance { max_std: f64, range: f64 },
    /// Fewer sweep points than candidate polynomial coefficients.
    Undersampled { points: usize, max_order: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::NonSmooth => write!(f, "second-order result on a non-smooth (relu) network"),
            Warning::Kink => write!(f, "evaluation point on a relu kink; left derivative used"),
            Warning::Cancellation { bound } => {
                write!(f, "finite-difference cancellation, estimated error up to {bound:.3e}")
            }
            Warning::Extrapolation { alpha, low, high } => {
                write!(f, "alpha {alpha} outside domain [{low}, {high}]")
            }
            Warning::HighVariance { max_std, range } => write!(
                f,
                "predictive std {max_std:.3e} exceeds 10% of the expectation range {range:.3e}; sample more alphas"
            ),
            Warning::Undersampled { points, max_order } => write!(
                f,
                "high predictive variance risk: {points} sweep points cannot pin down polynomials up to order {max_order}; sample more alphas"
            ),
        }
    }
}

/// A value together with any warnings raised while computing it.
#[derive(Debug, Clone)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }

    pub fn with(value: T, warnings: Vec<Warning>) -> Self {
        Self { value, warnings }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked { value: f(self.value), warnings: self.warnings }
    }
}
