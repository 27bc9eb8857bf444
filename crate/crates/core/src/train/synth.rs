use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::SequenceDataset;
use crate::error::{AceError, Result};

/// Shortest generated sequence; lengths are uniform in `MIN..=MIN + 5`.
pub const SYNTH_MIN_LEN: usize = 10;
/// Standard deviation of every generated value.
pub const SYNTH_NOISE_STD: f64 = 0.2;
/// Leading steps that carry the label.
const SIGNAL_STEPS: usize = 3;

/// Single-feature sequences whose first three steps are centred on +1
/// (label 1) or -1 (label 0) with equal probability; later steps are centred
/// on 0.
pub fn synth_sequences(n: usize, seed: u64) -> Result<(SequenceDataset, Vec<f64>)> {
    if n == 0 {
        return Err(AceError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SYNTH_NOISE_STD).expect("std");
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.random_range(SYNTH_MIN_LEN..=SYNTH_MIN_LEN + 5);
        let positive = rng.random_bool(0.5);
        let centre = if positive { 1.0 } else { -1.0 };
        let seq = Array2::from_shape_fn((len, 1), |(t, _)| {
            let mean = if t < SIGNAL_STEPS { centre } else { 0.0 };
            mean + noise.sample(&mut rng)
        });
        sequences.push(seq);
        labels.push(if positive { 1.0 } else { 0.0 });
    }
    let ids = (0..n).map(|s| s.to_string()).collect();
    Ok((SequenceDataset::new(vec!["x".into()], ids, sequences)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_balance_and_means() {
        let (data, labels) = synth_sequences(10_000, 3).unwrap();
        assert!(data.sequences.iter().all(|s| (10..=15).contains(&s.nrows())));
        let ones = labels.iter().sum::<f64>() / labels.len() as f64;
        assert!((ones - 0.5).abs() < 0.05);
        let step0: Vec<f64> = data.sequences.iter().zip(&labels).filter(|(_, &l)| l == 1.0).map(|(s, _)| s[(0, 0)]).collect();
        let mean = step0.iter().sum::<f64>() / step0.len() as f64;
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = synth_sequences(50, 9).unwrap();
        let b = synth_sequences(50, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_ne!(a.0, synth_sequences(50, 10).unwrap().0);
    }
}
