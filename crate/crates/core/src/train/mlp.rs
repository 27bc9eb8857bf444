use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EpochLog, Trained};
use crate::error::{AceError, Result};
use crate::net::{Activation, DenseLayer, Network};

fn xavier(rng: &mut ChaCha8Rng, fan_out: usize, fan_in: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit))
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    row.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) }).0
}

/// Fraction of rows whose largest output is the labelled class.
pub fn mlp_accuracy(net: &Network, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let out = net.forward_batch(x)?;
    let hits = out.rows().into_iter().zip(labels).filter(|(r, &l)| argmax(*r) == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Softmax cross-entropy classifier. `sizes` lists every width from input to
/// classes; hidden layers use `activation` and the output layer is linear
/// (logits). Weights start Xavier-uniform from `seed`, biases at zero.
pub fn train_mlp(
    x: &Array2<f64>,
    labels: &[usize],
    sizes: &[usize],
    activation: Activation,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Trained<Network>> {
    if x.nrows() == 0 {
        return Err(AceError::EmptyData);
    }
    if labels.len() != x.nrows() {
        return Err(AceError::Shape { expected: x.nrows(), got: labels.len() });
    }
    if sizes.len() < 2 || sizes[0] != x.ncols() {
        return Err(AceError::InvalidNetwork(format!("layer sizes {sizes:?} do not start at {} inputs", x.ncols())));
    }
    let classes = sizes[sizes.len() - 1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(AceError::Parse(format!("label {bad} out of range for {classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = sizes.len() - 2;
    let mut weights: Vec<Array2<f64>> = sizes.windows(2).map(|w| xavier(&mut rng, w[1], w[0])).collect();
    let mut biases: Vec<Array1<f64>> = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
    let acts: Vec<Activation> = (0..=last).map(|l| if l == last { Activation::Identity } else { activation }).collect();

    let n = x.nrows() as f64;
    let mut onehot = Array2::zeros((x.nrows(), classes));
    for (r, &l) in labels.iter().enumerate() {
        onehot[(r, l)] = 1.0;
    }
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        // forward, keeping pre-activations and activations
        let mut pre = Vec::with_capacity(weights.len());
        let mut post = vec![x.clone()];
        for l in 0..weights.len() {
            let z = post[l].dot(&weights[l].t()) + biases[l].view().insert_axis(Axis(0));
            let act = acts[l];
            post.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
        }
        let p = softmax_rows(&post[post.len() - 1]);
        let loss = -(&p * &onehot).sum_axis(Axis(1)).mapv(|v| v.max(f64::MIN_POSITIVE).ln()).sum() / n;
        if !loss.is_finite() {
            return Err(AceError::Divergence(epoch));
        }
        let hits = p.rows().into_iter().zip(labels).filter(|(r, &l)| argmax(*r) == l).count();
        log.push(EpochLog { epoch, loss, accuracy: hits as f64 / n });

        let mut delta = (&p - &onehot) / n;
        for l in (0..weights.len()).rev() {
            let gw = delta.t().dot(&post[l]);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let act = acts[l - 1];
                let back = delta.dot(&weights[l]);
                delta = back * &pre[l - 1].mapv(|v| act.d1(v));
            }
            weights[l].scaled_add(-lr, &gw);
            biases[l].scaled_add(-lr, &gb);
        }
    }
    let layers = weights
        .into_iter()
        .zip(biases)
        .zip(acts)
        .map(|((w, b), a)| DenseLayer::new(w, b, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trained { model: Network::new(layers)?, log })
}
