use nlr_core::qsim::{Axis, Observable, ShotConfig, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shot_means_converge_to_exact_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (shots, seeds) = (1000u64, 100u64);
    let tol = 4.0 / ((seeds * shots) as f64).sqrt();
    for _ in 0..20 {
        let n = rng.random_range(1..5);
        let mut state = StateVector::zero(n).unwrap();
        for _ in 0..10 {
            state.rotate(rng.random_range(0..n), Axis::ALL[rng.random_range(0..3)], rng.random_range(-3.0..3.0)).unwrap();
        }
        let obs = Observable::z(rng.random_range(0..n));
        let exact = state.expectation_z(obs).unwrap();
        let mean = (0..seeds).map(|s| state.sample_expectation(obs, ShotConfig::new(shots, s).unwrap()).unwrap()).sum::<f64>()
            / seeds as f64;
        assert!((mean - exact).abs() < tol, "{mean} vs {exact}");
    }
}

#[test]
fn single_shot_values_are_plus_minus_one() {
    let mut state = StateVector::zero(1).unwrap();
    state.rotate(0, Axis::Y, 1.0).unwrap();
    for s in 0..50 {
        let v = state.sample_expectation(Observable::z(0), ShotConfig::new(1, s).unwrap()).unwrap();
        assert!(v == 1.0 || v == -1.0);
    }
}
