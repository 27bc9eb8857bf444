use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EpochLog, Trained};
use crate::data::SequenceDataset;
use crate::error::{AceError, Result};
use crate::net::{sigmoid, Activation, DenseLayer, GateWeights, GruNetwork, Network};

/// Initial update-gate bias. Starting with the gate mostly closed carries
/// the state across steps, so gradients reach the early inputs of long
/// sequences.
pub const UPDATE_BIAS_INIT: f64 = 2.0;

/// Row-major gate parameters.
#[derive(Clone)]
struct Gate {
    w: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
}

impl Gate {
    fn zeros(h: usize, d: usize) -> Self {
        Self { w: vec![0.0; h * d], u: vec![0.0; h * h], b: vec![0.0; h] }
    }

    fn random(rng: &mut ChaCha8Rng, h: usize, d: usize) -> Self {
        let k = 1.0 / (h as f64).sqrt();
        let mut draw = |len: usize| (0..len).map(|_| rng.random_range(-k..k)).collect::<Vec<_>>();
        Self { w: draw(h * d), u: draw(h * h), b: draw(h) }
    }

    fn with_bias(mut self, b: f64) -> Self {
        self.b.fill(b);
        self
    }

    /// `W x + U v + b` for row `j`.
    fn pre(&self, j: usize, x: &[f64], v: &[f64]) -> f64 {
        let (d, h) = (x.len(), v.len());
        let wx: f64 = (0..d).map(|c| self.w[j * d + c] * x[c]).sum();
        let uv: f64 = (0..h).map(|c| self.u[j * h + c] * v[c]).sum();
        wx + uv + self.b[j]
    }

    fn step(&mut self, g: &Gate, lr: f64) {
        for (p, q) in self.w.iter_mut().zip(&g.w).chain(self.u.iter_mut().zip(&g.u)).chain(self.b.iter_mut().zip(&g.b)) {
            *p -= lr * q;
        }
    }

    fn to_weights(&self, h: usize, d: usize) -> GateWeights {
        GateWeights {
            w: Array2::from_shape_vec((h, d), self.w.clone()).expect("shape"),
            u: Array2::from_shape_vec((h, h), self.u.clone()).expect("shape"),
            b: Array1::from(self.b.clone()),
        }
    }

    #[cfg(test)]
    fn from_weights(g: &GateWeights) -> Self {
        Self { w: g.w.iter().copied().collect(), u: g.u.iter().copied().collect(), b: g.b.to_vec() }
    }
}

#[derive(Clone)]
struct Params {
    h: usize,
    d: usize,
    z: Gate,
    r: Gate,
    n: Gate,
    wo: Vec<f64>,
    bo: f64,
}

struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

impl Params {
    fn zeros(h: usize, d: usize) -> Self {
        Self { h, d, z: Gate::zeros(h, d), r: Gate::zeros(h, d), n: Gate::zeros(h, d), wo: vec![0.0; h], bo: 0.0 }
    }

    fn forward(&self, seq: &Array2<f64>, keep: bool) -> (f64, Vec<Step>, Vec<f64>) {
        let h = self.h;
        let mut state = vec![0.0; h];
        let mut steps = Vec::with_capacity(if keep { seq.nrows() } else { 0 });
        for row in seq.rows() {
            let x: Vec<f64> = row.to_vec();
            let z: Vec<f64> = (0..h).map(|j| sigmoid(self.z.pre(j, &x, &state))).collect();
            let r: Vec<f64> = (0..h).map(|j| sigmoid(self.r.pre(j, &x, &state))).collect();
            let rh: Vec<f64> = (0..h).map(|j| r[j] * state[j]).collect();
            let n: Vec<f64> = (0..h).map(|j| self.n.pre(j, &x, &rh).tanh()).collect();
            let next: Vec<f64> = (0..h).map(|j| (1.0 - z[j]) * n[j] + z[j] * state[j]).collect();
            if keep {
                steps.push(Step { x, h_prev: std::mem::take(&mut state), z, r, n });
            }
            state = next;
        }
        let logit: f64 = (0..h).map(|j| self.wo[j] * state[j]).sum::<f64>() + self.bo;
        (logit, steps, state)
    }

    /// Accumulates `scale * d loss / d params` for one sequence into `g`.
    #[allow(clippy::needless_range_loop)]
    fn backward(&self, steps: &[Step], last: &[f64], dlogit: f64, g: &mut Params) {
        let (h, d) = (self.h, self.d);
        for j in 0..h {
            g.wo[j] += dlogit * last[j];
        }
        g.bo += dlogit;
        let mut dh: Vec<f64> = (0..h).map(|j| dlogit * self.wo[j]).collect();
        for s in steps.iter().rev() {
            let mut dprev: Vec<f64> = (0..h).map(|j| dh[j] * s.z[j]).collect();
            let da_z: Vec<f64> = (0..h).map(|j| dh[j] * (s.h_prev[j] - s.n[j]) * s.z[j] * (1.0 - s.z[j])).collect();
            let da_n: Vec<f64> = (0..h).map(|j| dh[j] * (1.0 - s.z[j]) * (1.0 - s.n[j] * s.n[j])).collect();
            let rh: Vec<f64> = (0..h).map(|j| s.r[j] * s.h_prev[j]).collect();
            // through the candidate
            let mut drh = vec![0.0; h];
            for j in 0..h {
                for c in 0..d {
                    g.n.w[j * d + c] += da_n[j] * s.x[c];
                }
                for c in 0..h {
                    g.n.u[j * h + c] += da_n[j] * rh[c];
                    drh[c] += self.n.u[j * h + c] * da_n[j];
                }
                g.n.b[j] += da_n[j];
            }
            let da_r: Vec<f64> = (0..h).map(|c| drh[c] * s.h_prev[c] * s.r[c] * (1.0 - s.r[c])).collect();
            for c in 0..h {
                dprev[c] += drh[c] * s.r[c];
            }
            for (gate, grad, da) in [(&self.z, &mut g.z, &da_z), (&self.r, &mut g.r, &da_r)] {
                for j in 0..h {
                    for c in 0..d {
                        grad.w[j * d + c] += da[j] * s.x[c];
                    }
                    for c in 0..h {
                        grad.u[j * h + c] += da[j] * s.h_prev[c];
                        dprev[c] += gate.u[j * h + c] * da[j];
                    }
                    grad.b[j] += da[j];
                }
            }
            dh = dprev;
        }
    }

    fn step(&mut self, g: &Params, lr: f64) {
        self.z.step(&g.z, lr);
        self.r.step(&g.r, lr);
        self.n.step(&g.n, lr);
        for (p, q) in self.wo.iter_mut().zip(&g.wo) {
            *p -= lr * q;
        }
        self.bo -= lr * g.bo;
    }

    fn to_network(&self) -> Result<GruNetwork> {
        let readout = Network::new(vec![DenseLayer::new(
            Array2::from_shape_vec((1, self.h), self.wo.clone()).expect("shape"),
            Array1::from(vec![self.bo]),
            Activation::Sigmoid,
        )?])?;
        GruNetwork::new(
            self.z.to_weights(self.h, self.d),
            self.r.to_weights(self.h, self.d),
            self.n.to_weights(self.h, self.d),
            readout,
            false,
        )
    }
}

/// Probability of label 1 at the final step of `seq`.
pub fn gru_predict(rnn: &GruNetwork, seq: &Array2<f64>) -> Result<f64> {
    let steps: Vec<Array1<f64>> = seq.rows().into_iter().map(|r| r.to_owned()).collect();
    let trace = rnn.unroll(&steps, steps.len(), &[])?;
    Ok(trace.outputs[steps.len() - 1][0])
}

/// Fraction of sequences whose final-step probability falls on the side of
/// 0.5 matching the label.
pub fn gru_accuracy(rnn: &GruNetwork, data: &SequenceDataset, labels: &[f64]) -> Result<f64> {
    let mut hits = 0usize;
    for (seq, &l) in data.sequences.iter().zip(labels) {
        if (gru_predict(rnn, seq)? >= 0.5) == (l >= 0.5) {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Binary GRU classifier read at each sequence's final step through a
/// sigmoid readout, trained on mean logistic loss by backpropagation through
/// time. Weights start uniform in `±1/sqrt(hidden_dim)` from `seed`, except
/// the update-gate bias, which starts at [`UPDATE_BIAS_INIT`].
pub fn train_gru(
    data: &SequenceDataset,
    labels: &[f64],
    hidden_dim: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Trained<GruNetwork>> {
    if data.is_empty() {
        return Err(AceError::EmptyData);
    }
    if labels.len() != data.len() {
        return Err(AceError::Shape { expected: data.len(), got: labels.len() });
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(AceError::Parse("gru labels must be 0 or 1".into()));
    }
    if hidden_dim == 0 {
        return Err(AceError::InvalidNetwork("hidden_dim must be positive".into()));
    }
    let (h, d) = (hidden_dim, data.num_features());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params {
        h,
        d,
        z: Gate::random(&mut rng, h, d).with_bias(UPDATE_BIAS_INIT),
        r: Gate::random(&mut rng, h, d),
        n: Gate::random(&mut rng, h, d),
        wo: (0..h).map(|_| rng.random_range(-1.0 / (h as f64).sqrt()..1.0 / (h as f64).sqrt())).collect(),
        bo: 0.0,
    };
    let n = data.len() as f64;
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut g = Params::zeros(h, d);
        let (mut loss, mut hits) = (0.0, 0usize);
        for (seq, &y) in data.sequences.iter().zip(labels) {
            let (logit, steps, last) = p.forward(seq, true);
            // log(1 + e^-z) and log(1 + e^z) without overflow
            loss += if y == 1.0 { softplus(-logit) } else { softplus(logit) };
            if (logit >= 0.0) == (y == 1.0) {
                hits += 1;
            }
            p.backward(&steps, &last, (sigmoid(logit) - y) / n, &mut g);
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(AceError::Divergence(epoch));
        }
        log.push(EpochLog { epoch, loss, accuracy: hits as f64 / n });
        p.step(&g, lr);
    }
    Ok(Trained { model: p.to_network()?, log })
}

fn softplus(v: f64) -> f64 {
    Activation::Softplus.apply(v)
}
