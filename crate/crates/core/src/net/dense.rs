//! Layered feedforward networks with exact first and second derivatives.
//!
//! Gradients use a reverse sweep over the cached layer activations. Hessian
//! information comes from forward-over-reverse sweeps: a tangent direction is
//! pushed forward alongside the primal values, and the reverse sweep is then
//! differentiated along that tangent, yielding a Hessian-vector product.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::Activation;
use crate::error::{AceError, Checked, Result, Warning};

/// Default largest input dimension for which a dense Hessian is formed.
pub const DEFAULT_HESSIAN_CAP: usize = 1024;

/// Step used by the three-pass directional second derivative. Near the
/// fourth root of machine epsilon, which balances truncation against
/// rounding for a central second difference.
pub const DEFAULT_DSD_EPS: f64 = 1e-4;

/// Relative cancellation error above which the directional estimate is flagged.
const CANCELLATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Row-major `out x in` weight matrix.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(AceError::InvalidNetwork(format!(
                "weight rows {} do not match bias length {}",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("layer parameters"));
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, a: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&a) + &self.bias
    }
}

/// A stack of dense layers: the causal mechanism from inputs to outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Pre-activations recorded during a forward pass.
struct Trace {
    pre: Vec<Array1<f64>>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(AceError::InvalidNetwork("network has no layers".into()));
        }
        if layers[0].input_dim() == 0 {
            return Err(AceError::InvalidNetwork("network has no inputs".into()));
        }
        for (idx, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(AceError::InvalidNetwork(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    idx,
                    pair[0].output_dim(),
                    idx + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// True when every activation is twice continuously differentiable.
    pub fn is_smooth(&self) -> bool {
        self.layers.iter().all(|l| l.activation.is_smooth())
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(AceError::Shape { expected: self.input_dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("network input"));
        }
        Ok(())
    }

    fn check_output(&self, index: usize) -> Result<()> {
        if index >= self.output_dim() {
            return Err(AceError::OutputIndex { index, outputs: self.output_dim() });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.pre_activation(a.view()).mapv_into(|z| act.apply(z));
        }
        a
    }

    /// Evaluates many points at once; each row of `xs` is one input.
    pub fn forward_batch(&self, xs: &Array2<f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.input_dim() {
            return Err(AceError::Shape { expected: self.input_dim(), got: xs.ncols() });
        }
        if xs.iter().any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("network input"));
        }
        let mut a = xs.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias.view().insert_axis(Axis(0));
            a = z.mapv_into(|v| act.apply(v));
        }
        Ok(a)
    }

    fn trace(&self, x: ArrayView1<f64>) -> Trace {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = layer.pre_activation(a.view());
            let act = layer.activation;
            a = z.mapv(|v| act.apply(v));
            pre.push(z);
        }
        Trace { pre }
    }

    fn on_kink(&self, trace: &Trace) -> bool {
        self.layers
            .iter()
            .zip(&trace.pre)
            .any(|(l, z)| l.activation == Activation::Relu && z.iter().any(|&v| v == 0.0))
    }

    /// Gradient of output `output_index` with respect to the inputs.
    pub fn gradient(&self, x: ArrayView1<f64>, output_index: usize) -> Result<Checked<Array1<f64>>> {
        self.check_input(x)?;
        self.check_output(output_index)?;
        let trace = self.trace(x);
        let mut warnings = Vec::new();
        if self.on_kink(&trace) {
            warnings.push(Warning::Kink);
        }
        let last = self.layers.len() - 1;
        let mut delta = Array1::zeros(self.output_dim());
        delta[output_index] = self.layers[last].activation.d1(trace.pre[last][output_index]);
        for l in (0..self.layers.len()).rev() {
            let g = self.layers[l].weights.t().dot(&delta);
            if l == 0 {
                return Ok(Checked::with(g, warnings));
            }
            let act = self.layers[l - 1].activation;
            delta = g * trace.pre[l - 1].mapv(|z| act.d1(z));
        }
        unreachable!("network has at least one layer")
    }

    /// Gradient and Hessian-vector product `H v` from one forward-over-reverse sweep.
    pub fn hvp(
        &self,
        x: ArrayView1<f64>,
        v: ArrayView1<f64>,
        output_index: usize,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_input(x)?;
        self.check_output(output_index)?;
        if v.len() != x.len() {
            return Err(AceError::Shape { expected: x.len(), got: v.len() });
        }
        Ok(self.hvp_unchecked(x, v, output_index))
    }

    fn hvp_unchecked(
        &self,
        x: ArrayView1<f64>,
        v: ArrayView1<f64>,
        output_index: usize,
    ) -> (Array1<f64>, Array1<f64>) {
        let n = self.layers.len();
        // primal and tangent forward
        let mut pre = Vec::with_capacity(n);
        let mut pre_dot = Vec::with_capacity(n);
        let mut a = x.to_owned();
        let mut a_dot = v.to_owned();
        for layer in &self.layers {
            let z = layer.pre_activation(a.view());
            let z_dot = layer.weights.dot(&a_dot);
            let act = layer.activation;
            a = z.mapv(|t| act.apply(t));
            a_dot = ndarray::Zip::from(&z).and(&z_dot).map_collect(|&t, &td| act.d1(t) * td);
            pre.push(z);
            pre_dot.push(z_dot);
        }

        // reverse sweep on (value, tangent) pairs
        let out_act = self.layers[n - 1].activation;
        let zo = pre[n - 1][output_index];
        let mut delta = Array1::zeros(self.output_dim());
        let mut delta_dot = Array1::zeros(self.output_dim());
        delta[output_index] = out_act.d1(zo);
        delta_dot[output_index] = out_act.d2(zo) * pre_dot[n - 1][output_index];
        for l in (0..n).rev() {
            let w_t = self.layers[l].weights.t();
            let g = w_t.dot(&delta);
            let g_dot = w_t.dot(&delta_dot);
            if l == 0 {
                return (g, g_dot);
            }
            let act = self.layers[l - 1].activation;
            let z = &pre[l - 1];
            let zd = &pre_dot[l - 1];
            let mut next = Array1::zeros(z.len());
            let mut next_dot = Array1::zeros(z.len());
            for j in 0..z.len() {
                let d1 = act.d1(z[j]);
                next[j] = g[j] * d1;
                next_dot[j] = g_dot[j] * d1 + g[j] * act.d2(z[j]) * zd[j];
            }
            delta = next;
            delta_dot = next_dot;
        }
        unreachable!("network has at least one layer")
    }

    /// Dense Hessian of one output, one forward-over-reverse sweep per input.
    pub fn hessian(&self, x: ArrayView1<f64>, output_index: usize) -> Result<Checked<Array2<f64>>> {
        self.hessian_capped(x, output_index, DEFAULT_HESSIAN_CAP)
    }

    pub fn hessian_capped(
        &self,
        x: ArrayView1<f64>,
        output_index: usize,
        cap: usize,
    ) -> Result<Checked<Array2<f64>>> {
        self.check_input(x)?;
        self.check_output(output_index)?;
        let k = self.input_dim();
        if k > cap {
            return Err(AceError::HessianCap { inputs: k, cap });
        }
        let mut h = Array2::zeros((k, k));
        let mut e = Array1::zeros(k);
        for i in 0..k {
            e[i] = 1.0;
            let (_, col) = self.hvp_unchecked(x, e.view(), output_index);
            h.column_mut(i).assign(&col);
            e[i] = 0.0;
        }
        // sweeps are symmetric up to rounding
        let sym = (&h + &h.t()) * 0.5;
        let mut warnings = Vec::new();
        if !self.is_smooth() {
            warnings.push(Warning::NonSmooth);
            if self.on_kink(&self.trace(x)) {
                warnings.push(Warning::Kink);
            }
        }
        Ok(Checked::with(sym, warnings))
    }

    /// `(f(mu - eps v) + f(mu + eps v) - 2 f(mu)) / eps^2`: three forward passes.
    pub fn directional_second_derivative(
        &self,
        mu: ArrayView1<f64>,
        v: ArrayView1<f64>,
        eps: f64,
        output_index: usize,
    ) -> Result<Checked<f64>> {
        self.check_input(mu)?;
        self.check_output(output_index)?;
        if v.len() != mu.len() {
            return Err(AceError::Shape { expected: mu.len(), got: v.len() });
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(AceError::Parse(format!("eps must be positive, got {eps}")));
        }
        let f0 = self.forward_unchecked(mu)[output_index];
        let plus = (&mu + &(&v * eps)).to_owned();
        let minus = (&mu - &(&v * eps)).to_owned();
        let fp = self.forward_unchecked(plus.view())[output_index];
        let fm = self.forward_unchecked(minus.view())[output_index];
        let value = (fm + fp - 2.0 * f0) / (eps * eps);
        let mut warnings = Vec::new();
        if !self.is_smooth() {
            warnings.push(Warning::NonSmooth);
        }
        if let Some(w) = cancellation_warning(fp.abs() + fm.abs() + 2.0 * f0.abs(), value, eps) {
            warnings.push(w);
        }
        Ok(Checked::with(value, warnings))
    }
}

/// Flags a second difference whose rounding error, given the summed
/// magnitude `scale` of the function values involved, is large.
pub(crate) fn cancellation_warning(scale: f64, estimate: f64, eps: f64) -> Option<Warning> {
    let bound = f64::EPSILON * scale / (eps * eps);
    (bound > CANCELLATION_TOL * estimate.abs().max(1.0)).then_some(Warning::Cancellation { bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures;
    use ndarray::array;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(vec![DenseLayer::new(
            Array2::eye(2),
            Array1::zeros(2),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        assert_eq!(net.forward(array![1.0, 2.0].view()).unwrap(), array![1.0, 2.0]);
    }

    #[test]
    fn product_net_multiplies() {
        let net = fixtures::product_net();
        let y = net.forward(array![3.0, 5.0].view()).unwrap();
        assert!((y[0] - 15.0).abs() < 1e-12);
        let g = net.gradient(array![3.0, 5.0].view(), 0).unwrap().value;
        assert!((g[0] - 5.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
        let h = net.hessian(array![-1.5, 7.0].view(), 0).unwrap().value;
        let want = array![[0.0, 1.0], [1.0, 0.0]];
        assert!((&h - &want).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn zero_sigmoid_neuron_is_one_half() {
        let net = Network::new(vec![DenseLayer::new(
            array![[0.0, 0.0]],
            array![0.0],
            Activation::Sigmoid,
        )
        .unwrap()])
        .unwrap();
        for x in [array![0.0, 0.0], array![-30.0, 12.5]] {
            assert_eq!(net.forward(x.view()).unwrap()[0], 0.5);
        }
    }

    #[test]
    fn linear_net_has_constant_gradient_and_zero_hessian() {
        let net = fixtures::linear_net(&[3.0, 4.0], 0.0);
        for x in [array![0.0, 0.0], array![-2.0, 9.0]] {
            assert_eq!(net.gradient(x.view(), 0).unwrap().value, array![3.0, 4.0]);
            assert!(net.hessian(x.view(), 0).unwrap().value.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn directional_second_derivative_on_product_net() {
        let net = fixtures::product_net();
        let mu = array![0.3, -1.2];
        let d = net.directional_second_derivative(mu.view(), array![1.0, 1.0].view(), 1e-3, 0).unwrap();
        assert!((d.value - 2.0).abs() < 1e-6);
        let d = net.directional_second_derivative(mu.view(), array![1.0, 0.0].view(), 1e-3, 0).unwrap();
        assert!(d.value.abs() < 1e-6);
    }

    #[test]
    fn shape_and_domain_errors() {
        let net = fixtures::product_net();
        assert!(matches!(
            net.forward(array![1.0].view()),
            Err(AceError::Shape { expected: 2, got: 1 })
        ));
        assert!(matches!(
            net.forward(array![f64::NAN, 1.0].view()),
            Err(AceError::NonFinite(_))
        ));
        assert!(matches!(
            net.gradient(array![1.0, 1.0].view(), 3),
            Err(AceError::OutputIndex { .. })
        ));
    }

    #[test]
    fn relu_kink_is_flagged() {
        let net = Network::new(vec![
            DenseLayer::new(array![[1.0, -1.0]], array![0.0], Activation::Relu).unwrap(),
        ])
        .unwrap();
        let g = net.gradient(array![2.0, 2.0].view(), 0).unwrap();
        assert_eq!(g.warnings, vec![Warning::Kink]);
        assert_eq!(g.value, array![0.0, 0.0]);
        let h = net.hessian(array![3.0, 2.0].view(), 0).unwrap();
        assert!(h.warnings.contains(&Warning::NonSmooth));
    }

    #[test]
    fn hessian_cap_is_enforced() {
        let net = fixtures::product_net();
        assert!(matches!(
            net.hessian_capped(array![1.0, 1.0].view(), 0, 1),
            Err(AceError::HessianCap { inputs: 2, cap: 1 })
        ));
    }

    #[test]
    fn batch_forward_matches_pointwise() {
        let net = fixtures::random_net(&[3, 5, 2], Activation::Tanh, 4);
        let xs = array![[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]];
        let batch = net.forward_batch(&xs).unwrap();
        for (row, out) in xs.rows().into_iter().zip(batch.rows()) {
            let single = net.forward(row).unwrap();
            assert!((&single - &out).iter().all(|d| d.abs() < 1e-14));
        }
    }

    #[test]
    fn tiny_eps_raises_cancellation_warning() {
        let net = fixtures::random_net(&[2, 4, 1], Activation::Tanh, 9);
        let d = net
            .directional_second_derivative(array![0.1, 0.2].view(), array![1.0, 1.0].view(), 1e-8, 0)
            .unwrap();
        assert!(d.warnings.iter().any(|w| matches!(w, Warning::Cancellation { .. })));
    }
}
