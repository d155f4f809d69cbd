//! Parameter-shift gradients of circuit losses, and a central-difference
//! oracle used to check them.
//!
//! For a rotation `exp(-i θ/2 σ)` the expectation derivative is exactly
//! `½[f(θ + π/2) − f(θ − π/2)]`. The squared-error loss gradient follows by
//! the chain rule: `∂ℓ/∂θ_d = −2(y − ŷ)·∂ŷ/∂θ_d`, averaged over the batch.
//!
//! With shots every shifted circuit is sampled separately. Exact gradients
//! take the same derivative from one reverse sweep instead of `2P`
//! shifted circuits; [`shifted_expectation_gradient`] keeps the explicit
//! evaluation for comparison.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::ansatz::{apply_gate, run_gates, squared_error, CircuitSpec, Gate, Label, Sample, READOUT_QUBIT};
use crate::error::{Error, Result};
use crate::qsim::{sample_from_expectation, ShotConfig, StateVector};
use crate::rng::derive_seed;

/// One entry per circuit parameter, in loss units per radian.
pub type GradientVector = Vec<f64>;

const SHIFT_PLUS: u64 = 1;
const SHIFT_MINUS: u64 = 2;
const UNSHIFTED: u64 = 0;

/// A sample already mapped to its input state.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub state: StateVector,
    pub label: Label,
}

impl EncodedSample {
    pub fn from_sample(sample: &Sample, n_qubits: usize) -> Result<Self> {
        Ok(Self { state: sample.encode(n_qubits)?, label: sample.label })
    }
}

pub fn encode_batch(batch: &[Sample], n_qubits: usize) -> Result<Vec<EncodedSample>> {
    batch.iter().map(|s| EncodedSample::from_sample(s, n_qubits)).collect()
}

fn check_input(spec: &CircuitSpec, theta: &[f64], input: &StateVector) -> Result<()> {
    spec.check_theta(theta)?;
    if input.n_qubits() != spec.n_qubits() {
        return Err(Error::Shape { expected: spec.n_qubits(), got: input.n_qubits() });
    }
    Ok(())
}

/// Shot streams for one sample. `None` means exact expectations.
#[derive(Clone, Copy)]
struct SampleShots {
    cfg: ShotConfig,
    sample: u64,
}

impl SampleShots {
    fn draw(&self, exact: f64, tags: [u64; 2]) -> Result<f64> {
        let seed = derive_seed(self.cfg.seed, &[self.sample, tags[0], tags[1]]);
        sample_from_expectation(exact, self.cfg.with_seed(seed))
    }
}

/// Returns `(ŷ, ∂ŷ/∂θ)` for one input state by evaluating every shifted
/// circuit. The state before each rotation is reused, so only the suffix
/// after the shifted gate is re-simulated.
fn prediction_with_shift_gradient(
    gates: &[Gate],
    n_params: usize,
    theta: &[f64],
    input: &StateVector,
    shots: Option<SampleShots>,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; n_params];
    let mut state = input.clone();
    let mut shifted = input.clone();
    let mut shifted_theta = theta.to_vec();
    for (pos, &gate) in gates.iter().enumerate() {
        if let Gate::Rotation { param, .. } = gate {
            let mut f = [0.0; 2];
            for (slot, (shift, tag)) in [(FRAC_PI_2, SHIFT_PLUS), (-FRAC_PI_2, SHIFT_MINUS)].into_iter().enumerate() {
                shifted.clone_from(&state);
                shifted_theta[param] = theta[param] + shift;
                apply_gate(&mut shifted, gate, &shifted_theta);
                run_gates(&mut shifted, &gates[pos + 1..], theta);
                let exact = shifted.z_unchecked(READOUT_QUBIT);
                f[slot] = match shots {
                    None => exact,
                    Some(s) => s.draw(exact, [param as u64, tag])?,
                };
            }
            shifted_theta[param] = theta[param];
            grad[param] = 0.5 * (f[0] - f[1]);
        }
        apply_gate(&mut state, gate, theta);
    }
    let exact = state.z_unchecked(READOUT_QUBIT);
    let y_hat = match shots {
        None => exact,
        Some(s) => s.draw(exact, [u64::MAX, UNSHIFTED])?,
    };
    Ok((y_hat, grad))
}

/// Exact `(ŷ, ∂ŷ/∂θ)` by a reverse sweep. For `G = exp(−iθσ/2)`,
/// `∂⟨Z⟩/∂θ = Im⟨λ|σ|ψ⟩` where `ψ` is the state just after `G` and `λ`
/// is `Z` applied to the output, propagated back to the same point.
fn prediction_with_reverse_gradient(gates: &[Gate], n_params: usize, theta: &[f64], input: &StateVector) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; n_params];
    let mut psi = input.clone();
    run_gates(&mut psi, gates, theta);
    let y_hat = psi.z_unchecked(READOUT_QUBIT);
    let mut lambda = psi.clone();
    lambda.z_gate_unchecked(READOUT_QUBIT);
    for &gate in gates.iter().rev() {
        match gate {
            Gate::Rotation { qubit, axis, param } => {
                grad[param] += lambda.pauli_overlap_im(&psi, qubit, axis);
                psi.rotate_unchecked(qubit, axis, -theta[param]);
                lambda.rotate_unchecked(qubit, axis, -theta[param]);
            }
            Gate::Cnot { control, target } => {
                psi.cnot_unchecked(control, target);
                lambda.cnot_unchecked(control, target);
            }
        }
    }
    (y_hat, grad)
}

fn prediction_and_gradient(
    gates: &[Gate],
    n_params: usize,
    theta: &[f64],
    input: &StateVector,
    shots: Option<SampleShots>,
) -> Result<(f64, Vec<f64>)> {
    match shots {
        None => Ok(prediction_with_reverse_gradient(gates, n_params, theta, input)),
        Some(_) => prediction_with_shift_gradient(gates, n_params, theta, input, shots),
    }
}

/// Gradient of `⟨Z_0⟩` for a single input state.
pub fn expectation_gradient(
    spec: &CircuitSpec,
    theta: &[f64],
    input: &StateVector,
    shots: Option<ShotConfig>,
) -> Result<GradientVector> {
    check_input(spec, theta, input)?;
    let shots = shots.map(|cfg| SampleShots { cfg, sample: 0 });
    let (_, grad) = prediction_and_gradient(&spec.gates(), spec.parameter_count(), theta, input, shots)?;
    Ok(grad)
}

/// Exact gradient of `⟨Z_0⟩` from the `±π/2` shifted circuits themselves.
pub fn shifted_expectation_gradient(spec: &CircuitSpec, theta: &[f64], input: &StateVector) -> Result<GradientVector> {
    check_input(spec, theta, input)?;
    let (_, grad) = prediction_with_shift_gradient(&spec.gates(), spec.parameter_count(), theta, input, None)?;
    Ok(grad)
}

/// Mini-batch loss and its parameter-shift gradient, evaluated together.
///
/// Samples are processed in parallel; per-sample results are summed in
/// batch order, so the output does not depend on scheduling.
pub fn loss_and_gradient_encoded(
    spec: &CircuitSpec,
    theta: &[f64],
    batch: &[EncodedSample],
    shots: Option<ShotConfig>,
) -> Result<(f64, GradientVector)> {
    if batch.is_empty() {
        return Err(Error::argument("batch is empty"));
    }
    spec.check_theta(theta)?;
    let gates = spec.gates();
    let n_params = spec.parameter_count();
    let per_sample: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            check_input(spec, theta, &s.state)?;
            let shots = shots.map(|cfg| SampleShots { cfg, sample: i as u64 });
            let (y_hat, dy) = prediction_and_gradient(&gates, n_params, theta, &s.state, shots)?;
            let residual = s.label.value() - y_hat;
            let loss = squared_error(s.label, y_hat);
            Ok((loss, dy.into_iter().map(|d| -2.0 * residual * d).collect()))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in per_sample {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Parameter-shift gradient of the mean squared-error batch loss.
pub fn parameter_shift_gradient(
    spec: &CircuitSpec,
    theta: &[f64],
    batch: &[Sample],
    shots: Option<ShotConfig>,
) -> Result<GradientVector> {
    spec.check_theta(theta)?;
    let encoded = encode_batch(batch, spec.n_qubits())?;
    Ok(loss_and_gradient_encoded(spec, theta, &encoded, shots)?.1)
}

/// Exact mean squared-error loss over pre-encoded samples.
pub fn batch_loss_encoded(spec: &CircuitSpec, theta: &[f64], batch: &[EncodedSample]) -> Result<f64> {
    Ok(predictions_encoded(spec, theta, batch)?
        .iter()
        .zip(batch)
        .map(|(y_hat, s)| squared_error(s.label, *y_hat))
        .sum::<f64>()
        / batch.len() as f64)
}

/// Exact `⟨Z_0⟩` for every sample.
pub fn predictions_encoded(spec: &CircuitSpec, theta: &[f64], batch: &[EncodedSample]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::argument("batch is empty"));
    }
    spec.check_theta(theta)?;
    let gates = spec.gates();
    batch
        .par_iter()
        .map(|s| {
            check_input(spec, theta, &s.state)?;
            let mut state = s.state.clone();
            run_gates(&mut state, &gates, theta);
            Ok(state.z_unchecked(READOUT_QUBIT))
        })
        .collect()
}

/// Shot-sampled batch loss; sample `i` uses stream `(seed, i)`.
pub fn batch_loss_encoded_shots(
    spec: &CircuitSpec,
    theta: &[f64],
    batch: &[EncodedSample],
    cfg: ShotConfig,
) -> Result<f64> {
    let exact = predictions_encoded(spec, theta, batch)?;
    let mut total = 0.0;
    for (i, (e, s)) in exact.iter().zip(batch).enumerate() {
        let sampled = sample_from_expectation(*e, cfg.with_seed(derive_seed(cfg.seed, &[i as u64])))?;
        total += squared_error(s.label, sampled);
    }
    Ok(total / batch.len() as f64)
}

/// Central differences of the exact batch loss with step `h ∈ (0, 0.1)`.
pub fn finite_difference_gradient(spec: &CircuitSpec, theta: &[f64], batch: &[Sample], h: f64) -> Result<GradientVector> {
    if !(h > 0.0 && h < 0.1) {
        return Err(Error::argument(format!("finite-difference step {h} outside (0, 0.1)")));
    }
    spec.check_theta(theta)?;
    let encoded = encode_batch(batch, spec.n_qubits())?;
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|d| {
            probe[d] = theta[d] + h;
            let up = batch_loss_encoded(spec, &probe, &encoded)?;
            probe[d] = theta[d] - h;
            let down = batch_loss_encoded(spec, &probe, &encoded)?;
            probe[d] = theta[d];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

pub fn gradient_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{batch_loss, build_ansatz, predict};
    use crate::qsim::Axis;
    use std::f64::consts::FRAC_PI_3;

    #[test]
    fn norm_examples() {
        assert_eq!(gradient_norm(&[]), 0.0);
        assert_eq!(gradient_norm(&[0.0, 0.0]), 0.0);
        assert_eq!(gradient_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(gradient_norm(&[1.0]), 1.0);
    }

    #[test]
    fn single_ry_derivative_is_minus_sine() {
        // Only the Ry on qubit 0 is non-zero; the CNOT leaves ⟨Z_0⟩ = cos θ.
        let spec = build_ansatz(2, 1).unwrap();
        let mut theta = vec![0.0; 6];
        let ry0 = spec.param_index(0, Axis::Y, 0);
        theta[ry0] = FRAC_PI_3;
        let input = StateVector::zero(2).unwrap();
        let g = expectation_gradient(&spec, &theta, &input, None).unwrap();
        assert!((g[ry0] + FRAC_PI_3.sin()).abs() < 1e-12, "{}", g[ry0]);
    }

    #[test]
    fn zero_gradient_when_predictions_match_labels() {
        let spec = build_ansatz(3, 2).unwrap();
        let theta = vec![0.0; spec.parameter_count()];
        let sample = Sample::new(vec![1.0], Label::Positive).unwrap();
        assert_eq!(predict(&spec, &theta, &sample, None).unwrap(), 1.0);
        let g = parameter_shift_gradient(&spec, &theta, &[sample.clone(), sample], None).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reverse_sweep_matches_shifted_circuits() {
        let spec = build_ansatz(4, 3).unwrap();
        let theta: Vec<f64> = (0..spec.parameter_count()).map(|i| (0.37 * i as f64).sin() * 3.0).collect();
        let input = Sample::new(vec![0.3, -0.2, 0.9, 0.1, 0.4, -0.6, 0.2], Label::Positive).unwrap().encode(4).unwrap();
        let fast = expectation_gradient(&spec, &theta, &input, None).unwrap();
        let shifted = shifted_expectation_gradient(&spec, &theta, &input).unwrap();
        for (a, b) in fast.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn finite_difference_step_range() {
        let spec = build_ansatz(2, 1).unwrap();
        let s = Sample::new(vec![1.0, 1.0], Label::Negative).unwrap();
        for h in [0.2, 0.1, 0.0, -1e-3] {
            assert!(finite_difference_gradient(&spec, &[0.1; 6], &[s.clone()], h).is_err());
        }
        assert!(finite_difference_gradient(&spec, &[0.1; 6], &[s], 1e-4).is_ok());
    }

    #[test]
    fn fused_loss_matches_batch_loss() {
        let spec = build_ansatz(3, 2).unwrap();
        let theta: Vec<f64> = (0..spec.parameter_count()).map(|i| 0.3 * i as f64 - 1.0).collect();
        let batch = vec![
            Sample::new(vec![0.2, -0.5, 0.1, 0.9], Label::Positive).unwrap(),
            Sample::new(vec![1.0, 0.3, -0.7], Label::Negative).unwrap(),
        ];
        let encoded = encode_batch(&batch, 3).unwrap();
        let (loss, _) = loss_and_gradient_encoded(&spec, &theta, &encoded, None).unwrap();
        assert!((loss - batch_loss(&spec, &theta, &batch, None).unwrap()).abs() < 1e-14);
        assert!((batch_loss_encoded(&spec, &theta, &encoded).unwrap() - loss).abs() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let spec = build_ansatz(2, 1).unwrap();
        let s = Sample::new(vec![1.0], Label::Positive).unwrap();
        assert!(matches!(
            parameter_shift_gradient(&spec, &[0.0; 5], &[s.clone()], None),
            Err(Error::Shape { .. })
        ));
        assert!(parameter_shift_gradient(&spec, &[0.0; 6], &[], None).is_err());
        let wide = Sample::new(vec![1.0; 5], Label::Positive).unwrap();
        assert!(parameter_shift_gradient(&spec, &[0.0; 6], &[wide], None).is_err());
    }

    #[test]
    fn shot_gradient_is_seed_deterministic() {
        let spec = build_ansatz(2, 2).unwrap();
        let theta: Vec<f64> = (0..12).map(|i| 0.4 * i as f64).collect();
        let batch = vec![Sample::new(vec![0.3, 0.1, -0.8, 0.2], Label::Negative).unwrap()];
        let cfg = ShotConfig::new(500, 11).unwrap();
        let a = parameter_shift_gradient(&spec, &theta, &batch, Some(cfg)).unwrap();
        let b = parameter_shift_gradient(&spec, &theta, &batch, Some(cfg)).unwrap();
        assert_eq!(a, b);
        let c = parameter_shift_gradient(&spec, &theta, &batch, Some(cfg.with_seed(12))).unwrap();
        assert_ne!(a, c);
    }
}
