//! Gated recurrent networks and their time-unfolded derivatives.
//!
//! Cell equations (hidden state starts at zero):
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r * h) + b_n)
//! h' = (1 - z) * n + z * h
//! y  = readout(h')
//! ```

use ndarray::{Array1, Array2, ArrayView1};

use super::tape::{Dual, Scalar, Tape, Var};
use super::{Activation, Network};
use crate::error::{AceError, Checked, Result, Warning};

#[derive(Debug, Clone, PartialEq)]
pub struct GateWeights {
    /// `hidden x input`
    pub w: Array2<f64>,
    /// `hidden x hidden`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl GateWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w: Array2::zeros((hidden_dim, input_dim)),
            u: Array2::zeros((hidden_dim, hidden_dim)),
            b: Array1::zeros(hidden_dim),
        }
    }

    fn pre(&self, x: ArrayView1<f64>, h: ArrayView1<f64>) -> Array1<f64> {
        self.w.dot(&x) + self.u.dot(&h) + &self.b
    }

    fn validate(&self, name: &str, input_dim: usize, hidden_dim: usize) -> Result<()> {
        if self.w.dim() != (hidden_dim, input_dim)
            || self.u.dim() != (hidden_dim, hidden_dim)
            || self.b.len() != hidden_dim
        {
            return Err(AceError::InvalidNetwork(format!(
                "{name} gate shapes must be {hidden_dim}x{input_dim}, {hidden_dim}x{hidden_dim}, {hidden_dim}"
            )));
        }
        if self.w.iter().chain(self.u.iter()).chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("gate parameters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruNetwork {
    pub update: GateWeights,
    pub reset: GateWeights,
    pub candidate: GateWeights,
    pub readout: Network,
    /// When set, the readout of step `t` becomes the input of step `t + 1`
    /// wherever no data is supplied.
    pub outputs_feed_inputs: bool,
}

/// Replace input `feature` at `step` with `value` before the cell update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Override {
    pub step: usize,
    pub feature: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct UnrollTrace {
    /// Inputs actually fed to the cell, after overrides and feedback.
    pub inputs: Vec<Array1<f64>>,
    pub hidden: Vec<Array1<f64>>,
    pub outputs: Vec<Array1<f64>>,
}

impl UnrollTrace {
    /// Inputs of steps `0..steps` laid out step-major.
    pub fn flat_inputs(&self, steps: usize) -> Array1<f64> {
        self.inputs[..steps].iter().flat_map(|x| x.iter().copied()).collect()
    }
}

impl GruNetwork {
    pub fn new(
        update: GateWeights,
        reset: GateWeights,
        candidate: GateWeights,
        readout: Network,
        outputs_feed_inputs: bool,
    ) -> Result<Self> {
        let (hidden, input) = update.w.dim();
        if input == 0 || hidden == 0 {
            return Err(AceError::InvalidNetwork("gru needs input and hidden units".into()));
        }
        update.validate("update", input, hidden)?;
        reset.validate("reset", input, hidden)?;
        candidate.validate("candidate", input, hidden)?;
        if readout.input_dim() != hidden {
            return Err(AceError::InvalidNetwork(format!(
                "readout expects {} inputs but hidden size is {hidden}",
                readout.input_dim()
            )));
        }
        if outputs_feed_inputs && readout.output_dim() != input {
            return Err(AceError::InvalidNetwork(format!(
                "feedback requires readout width {} to equal input width {input}",
                readout.output_dim()
            )));
        }
        Ok(Self { update, reset, candidate, readout, outputs_feed_inputs })
    }

    pub fn input_dim(&self) -> usize {
        self.update.w.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.update.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.readout.output_dim()
    }

    pub fn is_smooth(&self) -> bool {
        self.readout.is_smooth()
    }

    pub(crate) fn cell(&self, x: ArrayView1<f64>, h: ArrayView1<f64>) -> Array1<f64> {
        let z = self.update.pre(x, h).mapv_into(|v| Activation::Sigmoid.apply(v));
        let r = self.reset.pre(x, h).mapv_into(|v| Activation::Sigmoid.apply(v));
        let rh = &r * &h;
        let n = (self.candidate.w.dot(&x) + self.candidate.u.dot(&rh) + &self.candidate.b)
            .mapv_into(f64::tanh);
        ndarray::Zip::from(&z).and(&n).and(&h).map_collect(|&z, &n, &h| (1.0 - z) * n + z * h)
    }

    /// Runs `horizon` steps. Steps before `seq.len()` read `seq`; later steps
    /// read the previous readout when `outputs_feed_inputs` is set.
    pub fn unroll(
        &self,
        seq: &[Array1<f64>],
        horizon: usize,
        overrides: &[Override],
    ) -> Result<UnrollTrace> {
        let d = self.input_dim();
        for o in overrides {
            if o.feature >= d {
                return Err(AceError::FeatureIndex { index: o.feature, features: d });
            }
            if o.step >= horizon {
                return Err(AceError::Horizon { step: o.step, horizon });
            }
            if !o.value.is_finite() {
                return Err(AceError::NonFinite("override value"));
            }
        }
        if !self.outputs_feed_inputs && horizon > seq.len() {
            return Err(AceError::SequenceLength { needed: horizon - 1, available: seq.len() });
        }
        let mut h = Array1::zeros(self.hidden_dim());
        let mut trace = UnrollTrace {
            inputs: Vec::with_capacity(horizon),
            hidden: Vec::with_capacity(horizon),
            outputs: Vec::with_capacity(horizon),
        };
        for step in 0..horizon {
            let mut x = if step < seq.len() {
                seq[step].clone()
            } else if step > 0 {
                trace.outputs[step - 1].clone()
            } else {
                return Err(AceError::SequenceLength { needed: 0, available: 0 });
            };
            if x.len() != d {
                return Err(AceError::Shape { expected: d, got: x.len() });
            }
            for o in overrides.iter().filter(|o| o.step == step) {
                x[o.feature] = o.value;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(AceError::NonFinite("sequence input"));
            }
            let next = self.cell(x.view(), h.view());
            h = next;
            trace.outputs.push(self.readout.forward_unchecked(h.view()));
            trace.hidden.push(h.clone());
            trace.inputs.push(x);
        }
        Ok(trace)
    }

    /// Records the teacher-forced unrolled graph; `inputs` is step-major.
    fn record<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var], steps: usize) -> Vec<Vec<Var>> {
        let d = self.input_dim();
        let hd = self.hidden_dim();
        let mut h: Vec<Var> = (0..hd).map(|_| tape.constant(0.0)).collect();
        let mut outputs = Vec::with_capacity(steps);
        for step in 0..steps {
            let x = &inputs[step * d..(step + 1) * d];
            let gate = |tape: &mut Tape<T>, g: &GateWeights, j: usize, hin: &[Var]| {
                let a = tape.affine(g.w.row(j).iter().copied(), x, g.b[j]);
                let c = tape.affine(g.u.row(j).iter().copied(), hin, 0.0);
                tape.add(a, c)
            };
            let mut z = Vec::with_capacity(hd);
            let mut rh = Vec::with_capacity(hd);
            for j in 0..hd {
                let pz = gate(tape, &self.update, j, &h);
                z.push(tape.act(pz, Activation::Sigmoid));
                let pr = gate(tape, &self.reset, j, &h);
                let r = tape.act(pr, Activation::Sigmoid);
                rh.push(tape.mul(r, h[j]));
            }
            let mut next = Vec::with_capacity(hd);
            for j in 0..hd {
                let pn = gate(tape, &self.candidate, j, &rh);
                let n = tape.act(pn, Activation::Tanh);
                let keep = tape.one_minus(z[j]);
                let a = tape.mul(keep, n);
                let b = tape.mul(z[j], h[j]);
                next.push(tape.add(a, b));
            }
            h = next;
            let mut a = h.clone();
            for layer in self.readout.layers() {
                a = (0..layer.output_dim())
                    .map(|o| {
                        let p = tape.affine(layer.weights.row(o).iter().copied(), &a, layer.bias[o]);
                        tape.act(p, layer.activation)
                    })
                    .collect();
            }
            outputs.push(a);
        }
        outputs
    }

    fn check_flat(&self, flat: ArrayView1<f64>, steps: usize) -> Result<()> {
        if steps == 0 {
            return Err(AceError::SequenceLength { needed: 0, available: 0 });
        }
        let want = steps * self.input_dim();
        if flat.len() != want {
            return Err(AceError::Shape { expected: want, got: flat.len() });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("sequence input"));
        }
        Ok(())
    }

    fn check_output(&self, index: usize) -> Result<()> {
        if index >= self.output_dim() {
            return Err(AceError::OutputIndex { index, outputs: self.output_dim() });
        }
        Ok(())
    }

    /// Output `output_index` at the last of `steps` steps, every input slot
    /// taken from `flat` (teacher forcing).
    pub fn unrolled_output(&self, flat: ArrayView1<f64>, steps: usize, output_index: usize) -> Result<f64> {
        self.check_flat(flat, steps)?;
        self.check_output(output_index)?;
        let d = self.input_dim();
        let mut h = Array1::zeros(self.hidden_dim());
        for step in 0..steps {
            let x = flat.slice(ndarray::s![step * d..(step + 1) * d]);
            h = self.cell(x, h.view());
        }
        Ok(self.readout.forward_unchecked(h.view())[output_index])
    }

    pub fn unrolled_gradient(&self, flat: ArrayView1<f64>, steps: usize, output_index: usize) -> Result<Array1<f64>> {
        self.check_flat(flat, steps)?;
        self.check_output(output_index)?;
        let mut tape = Tape::<f64>::new();
        let inputs: Vec<Var> = flat.iter().map(|&v| tape.input(v)).collect();
        let outs = self.record(&mut tape, &inputs, steps);
        let adj = tape.reverse(outs[steps - 1][output_index]);
        Ok(inputs.iter().map(|&v| Tape::adjoint_of(&adj, v)).collect())
    }

    /// Hessian of the unrolled output, one dual-number sweep per input slot.
    pub fn unrolled_hessian(
        &self,
        flat: ArrayView1<f64>,
        steps: usize,
        output_index: usize,
        cap: usize,
    ) -> Result<Checked<Array2<f64>>> {
        self.check_flat(flat, steps)?;
        self.check_output(output_index)?;
        let k = flat.len();
        if k > cap {
            return Err(AceError::HessianCap { inputs: k, cap });
        }
        let mut hess = Array2::zeros((k, k));
        for i in 0..k {
            let mut tape = Tape::<Dual>::new();
            let inputs: Vec<Var> = flat
                .iter()
                .enumerate()
                .map(|(j, &v)| tape.input(Dual::new(v, if i == j { 1.0 } else { 0.0 })))
                .collect();
            let outs = self.record(&mut tape, &inputs, steps);
            let adj = tape.reverse(outs[steps - 1][output_index]);
            for (j, &v) in inputs.iter().enumerate() {
                hess[(j, i)] = Tape::adjoint_of(&adj, v).d;
            }
        }
        let sym = (&hess + &hess.t()) * 0.5;
        let warnings = if self.is_smooth() { Vec::new() } else { vec![Warning::NonSmooth] };
        Ok(Checked::with(sym, warnings))
    }

    /// Jacobian of the full output vector at step `t` with respect to the
    /// inputs at step `t - lag`, by reverse sweeps over the unrolled graph.
    pub fn output_input_jacobian(&self, seq: &[Array1<f64>], t: usize, lag: usize) -> Result<Array2<f64>> {
        if lag > t {
            return Err(AceError::LagOutOfRange { lag, step: t });
        }
        if seq.len() <= t {
            return Err(AceError::SequenceLength { needed: t, available: seq.len() });
        }
        let d = self.input_dim();
        let flat: Array1<f64> = seq[..=t].iter().flat_map(|x| x.iter().copied()).collect();
        self.check_flat(flat.view(), t + 1)?;
        let mut tape = Tape::<f64>::new();
        let inputs: Vec<Var> = flat.iter().map(|&v| tape.input(v)).collect();
        let outs = self.record(&mut tape, &inputs, t + 1);
        let src = t - lag;
        let mut jac = Array2::zeros((self.output_dim(), d));
        for (o, &out) in outs[t].iter().enumerate() {
            let adj = tape.reverse(out);
            for f in 0..d {
                jac[(o, f)] = Tape::adjoint_of(&adj, inputs[src * d + f]);
            }
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures;
    use ndarray::array;

    fn seq(values: &[f64]) -> Vec<Array1<f64>> {
        values.iter().map(|&v| array![v]).collect()
    }

    #[test]
    fn decoupled_gru_matches_per_step_feedforward() {
        let rnn = fixtures::decoupled_gru(2, 3, 5);
        let ff = fixtures::decoupled_feedforward(&rnn);
        let xs = vec![array![0.3, -0.2], array![1.0, 0.4], array![-0.7, 0.9]];
        let trace = rnn.unroll(&xs, 3, &[]).unwrap();
        for (x, y) in xs.iter().zip(&trace.outputs) {
            let want = ff.forward(x.view()).unwrap();
            assert!((&want - y).iter().all(|d| d.abs() < 1e-14));
        }
    }

    #[test]
    fn hand_stepped_cell_matches_unroll() {
        let rnn = fixtures::random_gru(1, 2, 1, Activation::Sigmoid, false, 3);
        let xs = seq(&[0.5, -1.0, 0.25]);
        let trace = rnn.unroll(&xs, 3, &[]).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = [0.0f64; 2];
        for (step, x) in xs.iter().enumerate() {
            let x = x[0];
            let mut z = [0.0; 2];
            let mut r = [0.0; 2];
            for j in 0..2 {
                z[j] = sig(rnn.update.w[(j, 0)] * x
                    + rnn.update.u[(j, 0)] * h[0]
                    + rnn.update.u[(j, 1)] * h[1]
                    + rnn.update.b[j]);
                r[j] = sig(rnn.reset.w[(j, 0)] * x
                    + rnn.reset.u[(j, 0)] * h[0]
                    + rnn.reset.u[(j, 1)] * h[1]
                    + rnn.reset.b[j]);
            }
            let mut next = [0.0; 2];
            for j in 0..2 {
                let n = (rnn.candidate.w[(j, 0)] * x
                    + rnn.candidate.u[(j, 0)] * r[0] * h[0]
                    + rnn.candidate.u[(j, 1)] * r[1] * h[1]
                    + rnn.candidate.b[j])
                    .tanh();
                next[j] = (1.0 - z[j]) * n + z[j] * h[j];
            }
            h = next;
            let ro = &rnn.readout.layers()[0];
            let y = sig(ro.weights[(0, 0)] * h[0] + ro.weights[(0, 1)] * h[1] + ro.bias[0]);
            assert!((trace.outputs[step][0] - y).abs() < 1e-14, "step {step}");
        }
    }

    #[test]
    fn override_only_changes_later_steps() {
        let rnn = fixtures::random_gru(1, 3, 1, Activation::Sigmoid, false, 8);
        let xs = seq(&[0.1, 0.2, 0.3, 0.4]);
        let base = rnn.unroll(&xs, 4, &[]).unwrap();
        let hit = rnn.unroll(&xs, 4, &[Override { step: 1, feature: 0, value: 2.0 }]).unwrap();
        assert_eq!(base.outputs[0], hit.outputs[0]);
        assert_eq!(hit.inputs[1][0], 2.0);
        assert_eq!(hit.inputs[2], base.inputs[2]);
        assert_ne!(base.outputs[2], hit.outputs[2]);
    }

    #[test]
    fn feedback_generates_inputs_from_readouts() {
        let rnn = fixtures::random_gru(2, 3, 2, Activation::Tanh, true, 2);
        let xs = vec![array![0.1, 0.2]];
        let trace = rnn.unroll(&xs, 4, &[]).unwrap();
        for step in 1..4 {
            assert_eq!(trace.inputs[step], trace.outputs[step - 1]);
        }
        let forced = rnn.unroll(&xs, 4, &[Override { step: 2, feature: 1, value: -3.0 }]).unwrap();
        assert_eq!(forced.inputs[2][1], -3.0);
        assert_eq!(forced.inputs[2][0], trace.outputs[1][0]);
    }

    #[test]
    fn unroll_rejects_missing_data_and_bad_overrides() {
        let rnn = fixtures::random_gru(1, 2, 1, Activation::Sigmoid, false, 1);
        let xs = seq(&[0.1, 0.2]);
        assert!(matches!(rnn.unroll(&xs, 3, &[]), Err(AceError::SequenceLength { .. })));
        assert!(matches!(
            rnn.unroll(&xs, 2, &[Override { step: 2, feature: 0, value: 1.0 }]),
            Err(AceError::Horizon { .. })
        ));
        assert!(matches!(
            rnn.unroll(&xs, 2, &[Override { step: 0, feature: 4, value: 1.0 }]),
            Err(AceError::FeatureIndex { .. })
        ));
    }

    #[test]
    fn unroll_is_deterministic() {
        let rnn = fixtures::random_gru(2, 4, 2, Activation::Tanh, true, 11);
        let xs = vec![array![0.3, 0.1], array![-0.2, 0.5]];
        let o = [Override { step: 1, feature: 0, value: 0.7 }];
        let a = rnn.unroll(&xs, 6, &o).unwrap();
        let b = rnn.unroll(&xs, 6, &o).unwrap();
        for (x, y) in a.outputs.iter().zip(&b.outputs) {
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn decoupled_jacobian_vanishes_for_positive_lags() {
        let rnn = fixtures::decoupled_gru(2, 3, 7);
        let xs = vec![array![0.3, -0.2], array![1.0, 0.4], array![-0.7, 0.9]];
        for lag in 1..=2 {
            let j = rnn.output_input_jacobian(&xs, 2, lag).unwrap();
            assert!(j.iter().all(|v| *v == 0.0));
        }
        let j0 = rnn.output_input_jacobian(&xs, 2, 0).unwrap();
        assert!(j0.iter().any(|v| *v != 0.0));
        assert!(matches!(
            rnn.output_input_jacobian(&xs, 1, 2),
            Err(AceError::LagOutOfRange { lag: 2, step: 1 })
        ));
    }

    #[test]
    fn identity_readout_gives_identity_block_at_zero() {
        let rnn = fixtures::identity_gru(3);
        let xs = vec![Array1::zeros(3), Array1::zeros(3)];
        let j = rnn.output_input_jacobian(&xs, 1, 0).unwrap();
        assert!((&j - &Array2::<f64>::eye(3)).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn tape_output_matches_direct_unroll() {
        let rnn = fixtures::random_gru(2, 3, 1, Activation::Sigmoid, false, 5);
        let xs = vec![array![0.3, -0.2], array![1.0, 0.4], array![-0.7, 0.9]];
        let trace = rnn.unroll(&xs, 3, &[]).unwrap();
        let flat = trace.flat_inputs(3);
        let y = rnn.unrolled_output(flat.view(), 3, 0).unwrap();
        assert!((y - trace.outputs[2][0]).abs() < 1e-15);
    }
}
