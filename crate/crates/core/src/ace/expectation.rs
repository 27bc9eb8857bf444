//! Second-order interventional expectations at a single intervention.

use ndarray::{s, Array1, Array2};

use crate::error::{AceError, Checked, Result, Warning};
use crate::moments::{EigenPairs, Moments};
use crate::net::{cancellation_warning, Mechanism, NetOutput, Network, DEFAULT_DSD_EPS, DEFAULT_HESSIAN_CAP};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-13;

/// `f(mu) + 1/2 tr(H(mu) Cov)` for already-intervened moments.
pub fn taylor_exact<M: Mechanism + ?Sized>(mech: &M, moments: &Moments, cap: usize) -> Result<Checked<f64>> {
    check_dim(mech, moments)?;
    let f0 = mech.value(moments.mu.view())?;
    let mut warnings = Vec::new();
    if !mech.is_smooth() {
        warnings.push(Warning::NonSmooth);
    }
    if moments.cov.iter().all(|&c| c == 0.0) {
        return Ok(Checked::with(f0, warnings));
    }
    let k = mech.input_dim();
    if k > cap {
        return Err(AceError::HessianCap { inputs: k, cap });
    }
    let h = mech.hessian(moments.mu.view(), cap)?;
    for w in h.warnings {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    }
    let tr: f64 = (&h.value * &moments.cov).sum();
    Ok(Checked::with(f0 + 0.5 * tr, warnings))
}

/// Scaled eigen-directions `sqrt(lambda) e` of a covariance, one per row;
/// numerically zero eigenvalues are dropped.
#[derive(Debug, Clone)]
pub struct Directions {
    rows: Array2<f64>,
}

impl Directions {
    pub fn of(moments: &Moments) -> Result<Self> {
        Ok(Self::from_eigen(&moments.eigendecompose()?))
    }

    pub fn from_eigen(eig: &EigenPairs) -> Self {
        let top = eig.values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&r| eig.values[r] > RANK_TOL * top).collect();
        let k = eig.vectors.nrows();
        let rows = Array2::from_shape_fn((keep.len(), k), |(c, i)| {
            let r = keep[c];
            eig.values[r].sqrt() * eig.vectors[(i, r)]
        });
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

/// `f(mu) + 1/2 sum_r (f(mu + eps v_r) + f(mu - eps v_r) - 2 f(mu)) / eps^2`,
/// with every evaluation in one batch.
pub fn taylor_directional<M: Mechanism + ?Sized>(
    mech: &M,
    mu: &Array1<f64>,
    dirs: &Directions,
    eps: f64,
) -> Result<Checked<f64>> {
    if mu.len() != mech.input_dim() {
        return Err(AceError::Shape { expected: mech.input_dim(), got: mu.len() });
    }
    if dirs.rows.ncols() != mu.len() && !dirs.is_empty() {
        return Err(AceError::Shape { expected: mu.len(), got: dirs.rows.ncols() });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AceError::Parse(format!("eps must be positive, got {eps}")));
    }
    let r = dirs.len();
    let mut points = Array2::zeros((1 + 2 * r, mu.len()));
    points.row_mut(0).assign(mu);
    {
        let mut plus = points.slice_mut(s![1..1 + r, ..]);
        plus.assign(&(&dirs.rows * eps));
        plus += &mu.view().insert_axis(ndarray::Axis(0));
    }
    {
        let mut minus = points.slice_mut(s![1 + r.., ..]);
        minus.assign(&(&dirs.rows * -eps));
        minus += &mu.view().insert_axis(ndarray::Axis(0));
    }
    let f = mech.values(&points)?;
    let f0 = f[0];
    let mut second = 0.0;
    let mut scale = 0.0;
    for j in 0..r {
        let (fp, fm) = (f[1 + j], f[1 + r + j]);
        second += (fp + fm - 2.0 * f0) / (eps * eps);
        scale += fp.abs() + fm.abs() + 2.0 * f0.abs();
    }
    let mut warnings = Vec::new();
    if !mech.is_smooth() {
        warnings.push(Warning::NonSmooth);
    }
    if r > 0 {
        if let Some(w) = cancellation_warning(scale, 0.5 * second, eps) {
            warnings.push(w);
        }
    }
    Ok(Checked::with(f0 + 0.5 * second, warnings))
}

fn check_dim<M: Mechanism + ?Sized>(mech: &M, moments: &Moments) -> Result<()> {
    if moments.dim() != mech.input_dim() {
        return Err(AceError::Shape { expected: mech.input_dim(), got: moments.dim() });
    }
    Ok(())
}

/// `E[y | do(x_i = alpha)]` to second order with the exact Hessian.
/// `moments` must not be intervened on yet.
pub fn ie_exact(net: &Network, moments: &Moments, i: usize, alpha: f64, output_index: usize) -> Result<Checked<f64>> {
    let mech = output(net, output_index)?;
    taylor_exact(&mech, &moments.intervene(i, alpha)?, DEFAULT_HESSIAN_CAP)
}

/// `E[y | do(x_i = alpha)]` to second order with directional second
/// differences along the intervened covariance's eigenvectors.
pub fn ie_approx(
    net: &Network,
    moments: &Moments,
    i: usize,
    alpha: f64,
    eps: f64,
    output_index: usize,
) -> Result<Checked<f64>> {
    let mech = output(net, output_index)?;
    let m = moments.intervene(i, alpha)?;
    check_dim(&mech, &m)?;
    taylor_directional(&mech, &m.mu, &Directions::of(&m)?, eps)
}

/// [`ie_approx`] with the default step.
pub fn ie_approx_default(net: &Network, moments: &Moments, i: usize, alpha: f64, output_index: usize) -> Result<Checked<f64>> {
    ie_approx(net, moments, i, alpha, DEFAULT_DSD_EPS, output_index)
}

pub(crate) fn output(net: &Network, index: usize) -> Result<NetOutput<'_>> {
    if index >= net.output_dim() {
        return Err(AceError::OutputIndex { index, outputs: net.output_dim() });
    }
    Ok(NetOutput { net, index })
}
