//! Seeded workloads shared by the benchmarks.

use ace_core::ndarray::{Array1, Array2};
use ace_core::net::fixtures::random_net;
use ace_core::{Activation, Dataset, Moments, Network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A tanh net `k -> widths... -> 1` with a random full-rank covariance.
pub fn scenario(k: usize, widths: &[usize], seed: u64) -> (Network, Moments) {
    let mut sizes = vec![k];
    sizes.extend_from_slice(widths);
    sizes.push(1);
    let net = random_net(&sizes, Activation::Tanh, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let a = Array2::from_shape_fn((k, k), |_| normal.sample(&mut rng) / (k as f64).sqrt());
    let cov = a.dot(&a.t()) * 0.05;
    let mu = Array1::from_shape_fn(k, |_| 0.5 * normal.sample(&mut rng));
    (net, Moments::new(mu, cov).expect("finite moments"))
}

/// `n` Gaussian rows over `k` features.
pub fn dataset(n: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Dataset::from_rows(Array2::from_shape_fn((n, k), |_| normal.sample(&mut rng))).expect("finite rows")
}
