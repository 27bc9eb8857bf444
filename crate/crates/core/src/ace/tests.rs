use super::*;
use crate::net::fixtures;
use crate::oracle::enumerate_ie;
use crate::regressor::Hyper;
use crate::Activation;
use ndarray::{array, Array2};

fn product_data() -> Dataset {
    // second column has mean 2; first column spans [0, 1]
    Dataset::from_rows(array![[0.0, 1.0], [1.0, 3.0], [0.25, 2.5], [0.75, 1.5]]).unwrap()
}

fn seqs(rows: Vec<Array2<f64>>) -> SequenceDataset {
    let k = rows[0].ncols();
    let ids = (0..rows.len()).map(|s| s.to_string()).collect();
    SequenceDataset::new((0..k).map(|f| format!("x{f}")).collect(), ids, rows).unwrap()
}

fn random_seqs(n: usize, len: usize, d: usize, seed: u64) -> SequenceDataset {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.5).unwrap();
    seqs((0..n).map(|_| Array2::from_shape_fn((len, d), |_| normal.sample(&mut rng))).collect())
}

#[test]
fn grid_is_inclusive_linspace() {
    let g = InterventionGrid::new(0, Domain::new(0.0, 1.0), 5).unwrap();
    assert_eq!(g.alphas, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert!(matches!(InterventionGrid::new(0, Domain::new(2.0, 2.0), 5), Err(AceError::DegenerateDomain { .. })));
    assert!(matches!(InterventionGrid::new(0, Domain::new(0.0, 1.0), 1), Err(AceError::GridSize(1))));
}

#[test]
fn method_names_round_trip() {
    for m in [Method::ExactTaylor, Method::ApproxDirectional, Method::Oracle] {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert_eq!("approx".parse::<Method>().unwrap(), Method::ApproxDirectional);
    assert!("taylor".parse::<Method>().is_err());
}

#[test]
fn product_sweep_is_alpha_times_mean() {
    let net = fixtures::product_net();
    let data = product_data();
    for method in [Method::ExactTaylor, Method::ApproxDirectional, Method::Oracle] {
        let sweep = sweep_feedforward(&net, &data, 0, 5, 0, method).unwrap().value;
        for (got, want) in sweep.ie.iter().zip([0.0, 0.5, 1.0, 1.5, 2.0]) {
            assert!((got - want).abs() < 1e-6, "{method}: {got} vs {want}");
        }
    }
}

#[test]
fn constant_net_has_zero_ace() {
    let net = fixtures::constant_net(2, 4.0);
    let sweep = sweep_feedforward(&net, &product_data(), 1, 7, 0, Method::ExactTaylor).unwrap().value;
    assert!(sweep.ie.iter().all(|&v| v == 4.0));
    for a in [1.0, 2.0, 3.0] {
        assert_eq!(ace_at(&sweep, a).value.ace, 0.0);
    }
}

#[test]
fn product_ace_is_two_alpha_minus_one() {
    let net = fixtures::product_net();
    let sweep = sweep_feedforward(&net, &product_data(), 0, 11, 0, Method::ExactTaylor).unwrap().value;
    let reg = CausalRegressor::fit(sweep.alphas(), &sweep.ie, 10, Hyper::default()).unwrap().value;
    for a in [0.0, 0.3, 0.5, 1.0] {
        assert!((ace_at(&sweep, a).value.ace - (2.0 * a - 1.0)).abs() < 1e-9);
        let r = ace_at(&reg, a).value;
        assert!((r.ace - (2.0 * a - 1.0)).abs() < 1e-6);
        assert_eq!(r.ace, r.ie - r.baseline);
        assert!(r.predictive_variance.unwrap() > 0.0);
    }
    let grid_mean: f64 = sweep.alphas().iter().map(|&a| ace_at(&reg, a).value.ace).sum::<f64>() / 11.0;
    assert!(grid_mean.abs() < 1e-6);
}

#[test]
fn ace_outside_domain_warns() {
    let net = fixtures::product_net();
    let sweep = sweep_feedforward(&net, &product_data(), 0, 5, 0, Method::ExactTaylor).unwrap().value;
    assert!(matches!(ace_at(&sweep, 3.0).warnings[..], [Warning::Extrapolation { .. }]));
}

#[test]
fn uniform_weight_hook_matches_closed_form() {
    let net = fixtures::product_net();
    let sweep = sweep_feedforward(&net, &product_data(), 0, 9, 0, Method::ExactTaylor).unwrap().value;
    let reg = CausalRegressor::fit(sweep.alphas(), &sweep.ie, 10, Hyper::default()).unwrap().value;
    let flat = Doer::Weighted(Arc::new(|_| 1.0));
    assert!((flat.baseline(&reg) - reg.baseline()).abs() < 1e-12);
    // all mass at the top of the domain: baseline approaches ie(1) = 2
    let skew = Doer::Weighted(Arc::new(|a: f64| (200.0 * (a - 1.0)).exp()));
    assert!((skew.baseline(&reg) - 2.0).abs() < 0.01);
}

#[test]
fn ice_examples() {
    let net = fixtures::product_net();
    let u = array![3.0, 5.0];
    assert!((ice(&net, &u, 1, 100.0, 0).unwrap() - 285.0).abs() < 1e-9);
    assert_eq!(ice(&net, &u, 0, 3.0, 0).unwrap(), 0.0);
    let lin = fixtures::linear_net(&[2.0, -0.5], 1.0);
    assert!((ice(&lin, &u, 1, 1.0, 0).unwrap() - (-0.5 * (1.0 - 5.0))).abs() < 1e-12);
}

#[test]
fn exact_sweep_tracks_oracle_on_smooth_net() {
    let net = fixtures::random_net(&[3, 6, 1], Activation::Softplus, 2);
    let rows = Array2::from_shape_fn((40, 3), |(r, c)| ((r * 7 + c * 13) % 17) as f64 / 17.0 - 0.5);
    let data = Dataset::from_rows(rows).unwrap();
    let sweep = sweep_feedforward(&net, &data, 2, 6, 0, Method::ExactTaylor).unwrap().value;
    for (&a, &ie) in sweep.alphas().iter().zip(&sweep.ie) {
        assert!((ie - enumerate_ie(&net, &data, 2, a, 0).unwrap()).abs() < 1e-2);
    }
}

#[test]
fn decoupled_recurrence_matches_feedforward_slice() {
    let rnn = fixtures::decoupled_gru(2, 3, 8);
    let ff = fixtures::decoupled_feedforward(&rnn);
    let data = random_seqs(30, 4, 2, 1);
    let t = 2;
    let slice = Dataset::from_rows(Array2::from_shape_fn((30, 2), |(s, f)| data.sequences[s][(t, f)])).unwrap();
    let grid = InterventionGrid::new(1, Domain::new(-1.0, 1.0), 6).unwrap();
    let cfg = SweepConfig::default();
    let ff_sweep = sweep_feedforward_on(&ff, &slice, grid.clone(), 0, &cfg).unwrap().value;
    let rnn_sweep = sweep_recurrent_on(&rnn, &data, grid.at_step(t), t, 0, &cfg).unwrap().value;
    for (a, b) in ff_sweep.ie.iter().zip(&rnn_sweep.ie) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn recurrent_methods_agree_on_random_gru() {
    let rnn = fixtures::random_gru(2, 3, 1, Activation::Sigmoid, false, 4);
    let data = random_seqs(25, 5, 2, 2);
    let grid = InterventionGrid::new(0, Domain::new(-1.0, 1.0), 4).unwrap().at_step(1);
    let run = |m| sweep_recurrent_on(&rnn, &data, grid.clone(), 3, 0, &SweepConfig { eps: 1e-4, ..SweepConfig::with_method(m) }).unwrap().value.ie;
    let (exact, approx, oracle) = (run(Method::ExactTaylor), run(Method::ApproxDirectional), run(Method::Oracle));
    for j in 0..4 {
        assert!((exact[j] - approx[j]).abs() < 1e-6 * (1.0 + exact[j].abs()), "{} vs {}", exact[j], approx[j]);
        assert!((exact[j] - oracle[j]).abs() < 2e-2, "{} vs {}", exact[j], oracle[j]);
    }
}

#[test]
fn feedback_replay_generates_later_inputs() {
    let rnn = fixtures::random_gru(1, 2, 1, Activation::Tanh, true, 6);
    let data = random_seqs(10, 3, 1, 3);
    let m = replayed_moments(&rnn, &data, 0, 1, 4, 0.7).unwrap();
    assert_eq!(m.dim(), 5);
    assert_eq!(m.mu[1], 0.7);
    assert!(m.cov.row(1).iter().all(|&c| c == 0.0));
}

#[test]
fn output_step_before_intervention_is_rejected() {
    let rnn = fixtures::decoupled_gru(1, 2, 1);
    let data = random_seqs(3, 4, 1, 1);
    let r = sweep_recurrent(&rnn, &data, 0, 3, 1, 5, 0, Method::ExactTaylor);
    assert!(matches!(r, Err(AceError::Horizon { .. })));
}

#[test]
fn constant_net_saliency_is_zero() {
    let net = fixtures::constant_net(2, 1.0);
    let map = saliency(&net, &product_data(), &array![0.5, 2.0], 0, &SaliencyConfig::default()).unwrap().value;
    assert!(map.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn product_saliency_on_symmetric_square() {
    let net = fixtures::product_net();
    let data = Dataset::from_rows(array![[0.0, 0.0], [0.0, 10.0], [10.0, 0.0], [10.0, 10.0]]).unwrap();
    let map = saliency(&net, &data, &array![3.0, 5.0], 0, &SaliencyConfig::default()).unwrap().value;
    // ACE_i(alpha) = 5 alpha - 25
    assert!((map[0] + 10.0).abs() < 1e-6 && map[1].abs() < 1e-6, "{map}");
    let cfg = SaliencyConfig { threshold: true, ..SaliencyConfig::default() };
    let thresholded = saliency(&net, &data, &array![3.0, 5.0], 0, &cfg).unwrap().value;
    assert_eq!(thresholded[0], 0.0);
}

#[test]
fn sensitivity_where_gradient_vanishes() {
    // at x = [1, 0] the gradient wrt x1 is x2 = 0, yet ACE of x1 varies with alpha
    let net = fixtures::product_net();
    assert_eq!(net.gradient(array![1.0, 0.0].view(), 0).unwrap().value[0], 0.0);
    let sweep = sweep_feedforward(&net, &product_data(), 0, 5, 0, Method::ExactTaylor).unwrap().value;
    let aces: Vec<f64> = sweep.alphas().iter().map(|&a| ace_at(&sweep, a).value.ace).collect();
    assert!(aces.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn tau_of_fixtures() {
    let data = random_seqs(5, 6, 1, 9);
    assert_eq!(tau(&fixtures::decoupled_gru(1, 3, 2), &data, 5, None, DEFAULT_TAU_TOL).unwrap(), 0);
    assert_eq!(tau(&fixtures::lag_one_gru(), &data, 5, None, DEFAULT_TAU_TOL).unwrap(), 1);
    assert_eq!(tau(&fixtures::lag_one_gru(), &data, 5, Some(0), DEFAULT_TAU_TOL).unwrap(), 1);
}

#[test]
fn dependence_measure_by_shape() {
    assert_eq!(DependenceMeasure::for_shape(1, 3), DependenceMeasure::SupNorm);
    assert_eq!(DependenceMeasure::for_shape(2, 2), DependenceMeasure::Determinant);
    assert_eq!(DependenceMeasure::for_shape(2, 3), DependenceMeasure::SmallestSingularValue);
    let j = array![[3.0, 0.0, 0.0], [0.0, 0.5, 0.0]];
    assert!((DependenceMeasure::SmallestSingularValue.evaluate(&j).unwrap() - 0.5).abs() < 1e-12);
    assert!((DependenceMeasure::Determinant.evaluate(&array![[2.0, 1.0], [1.0, 1.0]]).unwrap() - 1.0).abs() < 1e-12);
}
