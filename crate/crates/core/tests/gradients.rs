use nlr_core::ansatz::{build_ansatz, Label, Sample};
use nlr_core::autodiff::{
    encode_batch, expectation_gradient, finite_difference_gradient, loss_and_gradient_encoded, parameter_shift_gradient,
    shifted_expectation_gradient,
};
use nlr_core::qsim::{Axis, ShotConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_batch(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> Vec<Sample> {
    (0..size)
        .map(|_| {
            let features = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
            Sample::new(features, label).unwrap()
        })
        .collect()
}

#[test]
fn shift_rule_matches_central_differences() {
    let spec = build_ansatz(4, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let theta: Vec<f64> = (0..spec.parameter_count()).map(|_| rng.random_range(-PI..PI)).collect();
        let batch = random_batch(&mut rng, 4, 10);
        let ps = parameter_shift_gradient(&spec, &theta, &batch, None).unwrap();
        let fd = finite_difference_gradient(&spec, &theta, &batch, 1e-5).unwrap();
        let worst = ps.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "max error {worst}");
    }
}

#[test]
fn trailing_z_rotations_have_zero_gradient() {
    // Diagonal phases then a CNOT permutation cannot move Z_0 probabilities.
    let spec = build_ansatz(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta: Vec<f64> = (0..spec.parameter_count()).map(|_| rng.random_range(-PI..PI)).collect();
    let input = random_batch(&mut rng, 1, 8)[0].encode(3).unwrap();
    let fast = expectation_gradient(&spec, &theta, &input, None).unwrap();
    let shifted = shifted_expectation_gradient(&spec, &theta, &input).unwrap();
    for q in 0..3 {
        let k = spec.param_index(1, Axis::Z, q);
        assert!(fast[k].abs() < 1e-14 && shifted[k].abs() < 1e-14, "qubit {q}: {} {}", fast[k], shifted[k]);
    }
    assert!(fast.iter().any(|g| g.abs() > 1e-3));
}

#[test]
fn shot_gradient_is_unbiased() {
    let spec = build_ansatz(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let theta: Vec<f64> = (0..spec.parameter_count()).map(|_| rng.random_range(-PI..PI)).collect();
    let batch = encode_batch(&random_batch(&mut rng, 1, 4), 2).unwrap();
    let (_, exact) = loss_and_gradient_encoded(&spec, &theta, &batch, None).unwrap();
    let runs = 200;
    let draws: Vec<Vec<f64>> = (0..runs)
        .map(|s| loss_and_gradient_encoded(&spec, &theta, &batch, Some(ShotConfig::new(1000, s).unwrap())).unwrap().1)
        .collect();
    for (k, e) in exact.iter().enumerate() {
        let mean = draws.iter().map(|d| d[k]).sum::<f64>() / runs as f64;
        let var = draws.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - e).abs() < 5.0 * se + 1e-12, "param {k}: {mean} vs {e} (se {se})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reverse_sweep_equals_shifted_circuits(
        theta in prop::collection::vec(-PI..PI, 12),
        features in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        prop_assume!(features.iter().any(|f| f.abs() > 1e-3));
        let spec = build_ansatz(2, 2).unwrap();
        let input = Sample::new(features, Label::Positive).unwrap().encode(2).unwrap();
        let a = expectation_gradient(&spec, &theta, &input, None).unwrap();
        let b = shifted_expectation_gradient(&spec, &theta, &input).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
