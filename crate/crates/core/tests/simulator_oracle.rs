//! State-vector gates against explicit Kronecker-product matrices.

use nlr_core::qsim::{Axis, Observable, StateVector};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Matrix = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn add(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

fn apply(m: &Matrix, v: &[C]) -> Vec<C> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn pauli(axis: Axis) -> Matrix {
    match axis {
        Axis::X => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        Axis::Y => vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]],
        Axis::Z => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}

/// `exp(−iθ/2 σ) = cos(θ/2)·I − i sin(θ/2)·σ`.
fn rotation(axis: Axis, theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let pauli = pauli(axis);
    (0..2).map(|i| (0..2).map(|j| identity(2)[i][j] * co + pauli[i][j] * c(0.0, -s)).collect()).collect()
}

/// Tensor product over qubits, qubit 0 leftmost.
fn embed(n: usize, factors: &[(usize, Matrix)]) -> Matrix {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        let m = factors.iter().find(|(k, _)| *k == q).map(|(_, m)| m.clone()).unwrap_or_else(|| identity(2));
        out = kron(&out, &m);
    }
    out
}

fn cnot_matrix(n: usize, control: usize, target: usize) -> Matrix {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    add(&embed(n, &[(control, p0)]), &embed(n, &[(control, p1), (target, pauli(Axis::X))]))
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    let mut v: Vec<C> = (0..1 << n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

#[test]
fn random_circuits_match_dense_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for draw in 0..200 {
        let n = 1 + draw % 3;
        let start = random_state(n, &mut rng);
        let mut state = StateVector::from_amplitudes(start.clone()).unwrap();
        let mut oracle = start;
        for _ in 0..rng.random_range(1..25) {
            if n >= 2 && rng.random_bool(0.3) {
                let control = rng.random_range(0..n);
                let target = (control + rng.random_range(1..n)) % n;
                state.cnot(control, target).unwrap();
                oracle = apply(&cnot_matrix(n, control, target), &oracle);
            } else {
                let q = rng.random_range(0..n);
                let axis = Axis::ALL[rng.random_range(0..3)];
                let theta = rng.random_range(-10.0..10.0);
                state.rotate(q, axis, theta).unwrap();
                oracle = apply(&embed(n, &[(q, rotation(axis, theta))]), &oracle);
            }
        }
        for (a, b) in state.amplitudes().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12, "draw {draw}: {a} vs {b}");
        }
        let z0: f64 = oracle.iter().enumerate().map(|(k, a)| if k >> (n - 1) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum();
        assert!((state.expectation_z(Observable::z(0)).unwrap() - z0).abs() < 1e-12);
    }
}

#[test]
fn norm_is_preserved_over_long_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let mut state = StateVector::zero(n).unwrap();
    for _ in 0..10_000 {
        if rng.random_bool(0.25) {
            let control = rng.random_range(0..n);
            state.cnot(control, (control + 1) % n).unwrap();
        } else {
            state.rotate(rng.random_range(0..n), Axis::ALL[rng.random_range(0..3)], rng.random_range(-7.0..7.0)).unwrap();
        }
    }
    assert!((state.norm_sqr() - 1.0).abs() < 1e-10, "{}", state.norm_sqr());
}
