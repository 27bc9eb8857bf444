//! Small reference networks used by tests, benches and examples.

use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Activation, DenseLayer, GateWeights, GruNetwork, Network};

/// Saturates a sigmoid gate to exactly 0 in f64.
const GATE_OFF: f64 = -1.0e3;
/// Saturates a sigmoid gate to exactly 1 in f64.
const GATE_ON: f64 = 1.0e3;

fn layer(w: Array2<f64>, b: Array1<f64>, act: Activation) -> DenseLayer {
    DenseLayer::new(w, b, act).expect("fixture layer")
}

/// `y = ((x1 + x2)^2 - (x1 - x2)^2) / 4 = x1 x2`
pub fn product_net() -> Network {
    Network::new(vec![
        layer(array![[1.0, 1.0], [1.0, -1.0]], array![0.0, 0.0], Activation::Square),
        layer(array![[0.25, -0.25]], array![0.0], Activation::Identity),
    ])
    .expect("fixture")
}

/// `y = w^T x + b`
pub fn linear_net(w: &[f64], b: f64) -> Network {
    let w = Array2::from_shape_vec((1, w.len()), w.to_vec()).expect("row");
    Network::new(vec![layer(w, array![b], Activation::Identity)]).expect("fixture")
}

/// `y = c` for any input of width `k`.
pub fn constant_net(k: usize, c: f64) -> Network {
    Network::new(vec![layer(Array2::zeros((1, k)), array![c], Activation::Identity)]).expect("fixture")
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize, std: f64) -> Array1<f64> {
    let dist = Normal::new(0.0, std).expect("std");
    Array1::from_shape_fn(len, |_| dist.sample(rng))
}

/// Random network with `hidden` activations and an identity output layer.
/// `sizes` lists every width from input to output.
pub fn random_net(sizes: &[usize], hidden: Activation, seed: u64) -> Network {
    assert!(sizes.len() >= 2, "need input and output widths");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = sizes.len() - 2;
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let std = 1.0 / (w[0] as f64).sqrt();
            let act = if i == last { Activation::Identity } else { hidden };
            layer(gaussian_matrix(&mut rng, w[1], w[0], std), gaussian_vector(&mut rng, w[1], 0.1), act)
        })
        .collect();
    Network::new(layers).expect("fixture")
}

/// Random GRU with a single-layer readout.
pub fn random_gru(
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    readout: Activation,
    outputs_feed_inputs: bool,
    seed: u64,
) -> GruNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
    let gate = |rng: &mut ChaCha8Rng| GateWeights {
        w: gaussian_matrix(rng, hidden_dim, input_dim, std),
        u: gaussian_matrix(rng, hidden_dim, hidden_dim, std),
        b: gaussian_vector(rng, hidden_dim, 0.1),
    };
    let update = gate(&mut rng);
    let reset = gate(&mut rng);
    let candidate = gate(&mut rng);
    let ro = Network::new(vec![layer(
        gaussian_matrix(&mut rng, output_dim, hidden_dim, 1.0 / (hidden_dim as f64).sqrt()),
        gaussian_vector(&mut rng, output_dim, 0.1),
        readout,
    )])
    .expect("fixture");
    GruNetwork::new(update, reset, candidate, ro, outputs_feed_inputs).expect("fixture")
}

/// GRU with no temporal coupling: update gate pinned at 0, recurrent
/// matrices zero. Each step is `readout(tanh(W_n x + b_n))`.
pub fn decoupled_gru(input_dim: usize, hidden_dim: usize, seed: u64) -> GruNetwork {
    let base = random_gru(input_dim, hidden_dim, 1, Activation::Sigmoid, false, seed);
    let mut update = GateWeights::zeros(input_dim, hidden_dim);
    update.b.fill(GATE_OFF);
    let mut reset = base.reset.clone();
    reset.u.fill(0.0);
    let mut candidate = base.candidate.clone();
    candidate.u.fill(0.0);
    GruNetwork::new(update, reset, candidate, base.readout, false).expect("fixture")
}

/// The per-step feedforward network equivalent to a [`decoupled_gru`].
pub fn decoupled_feedforward(rnn: &GruNetwork) -> Network {
    let mut layers = vec![layer(rnn.candidate.w.clone(), rnn.candidate.b.clone(), Activation::Tanh)];
    layers.extend(rnn.readout.layers().iter().cloned());
    Network::new(layers).expect("fixture")
}

/// `y^t = tanh(x^t)` per feature with an identity readout; its step
/// Jacobian at zero input is the identity.
pub fn identity_gru(dim: usize) -> GruNetwork {
    let mut update = GateWeights::zeros(dim, dim);
    update.b.fill(GATE_OFF);
    let reset = GateWeights::zeros(dim, dim);
    let mut candidate = GateWeights::zeros(dim, dim);
    candidate.w = Array2::eye(dim);
    let ro = Network::new(vec![layer(Array2::eye(dim), Array1::zeros(dim), Activation::Identity)])
        .expect("fixture");
    GruNetwork::new(update, reset, candidate, ro, false).expect("fixture")
}

/// Single-feature unit-lag passthrough: `y^t = tanh(tanh(x^{t-1}))`, with
/// no dependence on `x^t` or anything older than one step.
pub fn lag_one_gru() -> GruNetwork {
    let mut update = GateWeights::zeros(1, 2);
    update.b.fill(GATE_OFF);
    let mut reset = GateWeights::zeros(1, 2);
    reset.b.fill(GATE_ON);
    let mut candidate = GateWeights::zeros(1, 2);
    // unit 0 reads the current input, unit 1 reads unit 0 from the previous step
    candidate.w[(0, 0)] = 1.0;
    candidate.u[(1, 0)] = 1.0;
    let ro = Network::new(vec![layer(array![[0.0, 1.0]], array![0.0], Activation::Identity)])
        .expect("fixture");
    GruNetwork::new(update, reset, candidate, ro, false).expect("fixture")
}
