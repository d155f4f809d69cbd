//! Layered hardware-style ansatz, amplitude encoding and classifier losses.
//!
//! Each layer applies `Rx` to every qubit, then `Ry`, then `Rz`, then a CNOT
//! chain `q → q+1`. Parameter `ℓ·3n + a·n + q` drives axis `a` on qubit `q`
//! in layer `ℓ`. Predictions are `⟨Z_0⟩` of the circuit output.

use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::qsim::{sample_from_expectation, Axis, ShotConfig, StateVector, MAX_QUBITS};
use crate::rng::derive_seed;

/// The measured qubit.
pub const READOUT_QUBIT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Rotation { qubit: usize, axis: Axis, param: usize },
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    n_qubits: usize,
    layers: usize,
}

/// Validated constructor for the layered ansatz.
pub fn build_ansatz(n_qubits: usize, layers: usize) -> Result<CircuitSpec> {
    CircuitSpec::new(n_qubits, layers)
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, layers: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::argument(format!(
                "ansatz needs at least 2 qubits for its entangler, got {n_qubits}"
            )));
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!("{n_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        if layers == 0 {
            return Err(Error::argument("ansatz needs at least one layer"));
        }
        Ok(Self { n_qubits, layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn parameter_count(&self) -> usize {
        3 * self.n_qubits * self.layers
    }

    pub fn param_index(&self, layer: usize, axis: Axis, qubit: usize) -> usize {
        let a = match axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        };
        layer * 3 * self.n_qubits + a * self.n_qubits + qubit
    }

    /// Flattened gate sequence in application order.
    pub fn gates(&self) -> Vec<Gate> {
        let n = self.n_qubits;
        let mut gates = Vec::with_capacity(self.layers * (4 * n - 1));
        for layer in 0..self.layers {
            for axis in Axis::ALL {
                for qubit in 0..n {
                    gates.push(Gate::Rotation { qubit, axis, param: self.param_index(layer, axis, qubit) });
                }
            }
            for q in 0..n - 1 {
                gates.push(Gate::Cnot { control: q, target: q + 1 });
            }
        }
        gates
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.parameter_count() {
            return Err(Error::Shape { expected: self.parameter_count(), got: theta.len() });
        }
        ensure_finite(theta, "theta")
    }
}

/// Trainable rotation angles, one per rotation gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite(&values, "parameter")?;
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// Decision rule: `sign(ŷ)` with `sign(0) = +1`.
    pub fn from_prediction(y_hat: f64) -> Self {
        if y_hat >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::argument(format!("label {other} is not ±1"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Encoding("sample has no features".into()));
        }
        ensure_finite(&features, "feature")?;
        if features.iter().all(|&f| f == 0.0) {
            return Err(Error::Encoding("sample features are all zero".into()));
        }
        Ok(Self { features, label })
    }

    pub fn encode(&self, n_qubits: usize) -> Result<StateVector> {
        amplitude_encode(&self.features, n_qubits)
    }
}

/// `|x⟩ = Σ_k x_k/‖x‖ |k⟩`, zero-padded to `2^n_qubits` amplitudes.
pub fn amplitude_encode(features: &[f64], n_qubits: usize) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Size(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}")));
    }
    let dim = 1usize << n_qubits;
    if features.is_empty() || features.len() > dim {
        return Err(Error::Size(format!(
            "{} features do not fit {dim} amplitudes",
            features.len()
        )));
    }
    ensure_finite(features, "feature")?;
    let norm = features.iter().map(|f| f * f).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Encoding("cannot encode a zero-norm vector".into()));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (a, f) in amps.iter_mut().zip(features) {
        *a = Complex64::new(f / norm, 0.0);
    }
    StateVector::from_amplitudes(amps)
}

pub(crate) fn apply_gate(state: &mut StateVector, gate: Gate, theta: &[f64]) {
    match gate {
        Gate::Rotation { qubit, axis, param } => state.rotate_unchecked(qubit, axis, theta[param]),
        Gate::Cnot { control, target } => state.cnot_unchecked(control, target),
    }
}

pub(crate) fn run_gates(state: &mut StateVector, gates: &[Gate], theta: &[f64]) {
    for &g in gates {
        apply_gate(state, g, theta);
    }
}

/// `U(θ)|input⟩`, layers applied in order.
pub fn run_circuit(spec: &CircuitSpec, theta: &[f64], input: &StateVector) -> Result<StateVector> {
    spec.check_theta(theta)?;
    if input.n_qubits() != spec.n_qubits() {
        return Err(Error::Shape { expected: spec.n_qubits(), got: input.n_qubits() });
    }
    let mut state = input.clone();
    run_gates(&mut state, &spec.gates(), theta);
    Ok(state)
}

/// Exact or shot-sampled `⟨Z_0⟩` for one sample.
pub fn predict(spec: &CircuitSpec, theta: &[f64], sample: &Sample, shots: Option<ShotConfig>) -> Result<f64> {
    let input = sample.encode(spec.n_qubits())?;
    let exact = run_circuit(spec, theta, &input)?.z_unchecked(READOUT_QUBIT);
    match shots {
        None => Ok(exact),
        Some(cfg) => sample_from_expectation(exact, cfg),
    }
}

pub fn squared_error(label: Label, y_hat: f64) -> f64 {
    let r = label.value() - y_hat;
    r * r
}

/// Shot seed for sample `index` of a batch evaluated under `cfg`.
pub(crate) fn sample_shots(cfg: ShotConfig, index: usize) -> ShotConfig {
    cfg.with_seed(derive_seed(cfg.seed, &[index as u64]))
}

/// Mean squared error `(1/|B|) Σ (y − ŷ)²` over the batch.
pub fn batch_loss(spec: &CircuitSpec, theta: &[f64], batch: &[Sample], shots: Option<ShotConfig>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::argument("batch is empty"));
    }
    let mut total = 0.0;
    for (i, sample) in batch.iter().enumerate() {
        let y_hat = predict(spec, theta, sample, shots.map(|c| sample_shots(c, i)))?;
        total += squared_error(sample.label, y_hat);
    }
    Ok(total / batch.len() as f64)
}

/// Percentage of samples whose exact prediction sign matches the label.
pub fn accuracy(spec: &CircuitSpec, theta: &[f64], dataset: &[Sample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::argument("dataset is empty"));
    }
    let mut correct = 0usize;
    for sample in dataset {
        let y_hat = predict(spec, theta, sample, None)?;
        if Label::from_prediction(y_hat) == sample.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / dataset.len() as f64)
}

/// Accuracy of precomputed predictions; same decision rule as [`accuracy`].
pub fn accuracy_from_predictions(labels: &[Label], predictions: &[f64]) -> Result<f64> {
    if labels.is_empty() || labels.len() != predictions.len() {
        return Err(Error::argument("predictions and labels must be non-empty and equal length"));
    }
    let correct = labels
        .iter()
        .zip(predictions)
        .filter(|(l, p)| Label::from_prediction(**p) == **l)
        .count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    #[test]
    fn parameter_counts() {
        assert_eq!(build_ansatz(6, 5).unwrap().parameter_count(), 90);
        let small = build_ansatz(2, 1).unwrap();
        assert_eq!(small.parameter_count(), 6);
        let cnots = small.gates().iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
        assert_eq!(cnots, 1);
        let mid = build_ansatz(4, 3).unwrap();
        assert_eq!(mid.parameter_count(), 36);
        let cnots = mid.gates().iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
        assert_eq!(cnots, 9);
        assert!(build_ansatz(1, 3).is_err());
        assert!(build_ansatz(3, 0).is_err());
    }

    #[test]
    fn entangler_is_nearest_neighbour_and_every_param_used_once() {
        let spec = build_ansatz(5, 3).unwrap();
        let mut seen = vec![0; spec.parameter_count()];
        for g in spec.gates() {
            match g {
                Gate::Cnot { control, target } => assert_eq!(target, control + 1),
                Gate::Rotation { param, .. } => seen[param] += 1,
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn encoding_examples() {
        let s = amplitude_encode(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(s, StateVector::basis(2, 0).unwrap());
        let s = amplitude_encode(&[3.0, 4.0], 1).unwrap();
        assert!((s.amplitudes()[0].re - 0.6).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - 0.8).abs() < 1e-15);
        let s = amplitude_encode(&[1.0; 4], 2).unwrap();
        assert!(s.amplitudes().iter().all(|a| (a.re - 0.5).abs() < 1e-15 && a.im == 0.0));
        let padded = amplitude_encode(&[1.0, 2.0, 2.0], 3).unwrap();
        assert!((padded.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(padded.amplitudes()[3..].iter().all(|a| a.norm() == 0.0));
        assert!(matches!(amplitude_encode(&[0.0, 0.0], 1), Err(Error::Encoding(_))));
        assert!(matches!(amplitude_encode(&[1.0; 5], 2), Err(Error::Size(_))));
    }

    #[test]
    fn run_circuit_examples() {
        let spec = build_ansatz(2, 1).unwrap();
        let zero = StateVector::zero(2).unwrap();
        assert_eq!(run_circuit(&spec, &[0.0; 6], &zero).unwrap(), zero);

        // Rx(π)|0⟩ = −i|1⟩, then the CNOT flips qubit 1: −i|11⟩.
        let out = run_circuit(&spec, &[PI, 0.0, 0.0, 0.0, 0.0, 0.0], &zero).unwrap();
        let a = out.amplitudes();
        assert!(a[0].norm() < 1e-15 && a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
        assert!((a[3] - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        assert!(matches!(run_circuit(&spec, &[0.0; 5], &zero), Err(Error::Shape { .. })));
        let three = StateVector::zero(3).unwrap();
        assert!(run_circuit(&spec, &[0.0; 6], &three).is_err());
    }

    #[test]
    fn prediction_examples() {
        let spec = build_ansatz(2, 1).unwrap();
        let sample = Sample::new(vec![1.0, 0.0, 0.0, 0.0], Label::Positive).unwrap();
        assert_eq!(predict(&spec, &[0.0; 6], &sample, None).unwrap(), 1.0);

        // Ry(π/3) on qubit 0 (parameter 2); the CNOT only touches qubit 1,
        // so ⟨Z_0⟩ stays cos(π/3).
        let mut theta = [0.0; 6];
        theta[2] = FRAC_PI_3;
        assert!((predict(&spec, &theta, &sample, None).unwrap() - 0.5).abs() < 1e-12);

        let cfg = ShotConfig::new(1000, 42).unwrap();
        let a = predict(&spec, &theta, &sample, Some(cfg)).unwrap();
        assert_eq!(a, predict(&spec, &theta, &sample, Some(cfg)).unwrap());
        assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn loss_examples() {
        let spec = build_ansatz(2, 1).unwrap();
        let pos = Sample::new(vec![1.0, 0.0], Label::Positive).unwrap();
        let neg = Sample::new(vec![1.0, 0.0], Label::Negative).unwrap();
        // Zero θ on |00⟩ predicts exactly +1.
        assert_eq!(batch_loss(&spec, &[0.0; 6], &[pos.clone()], None).unwrap(), 0.0);

        // Ry(π/2) on qubit 0 gives ŷ = 0, so (1 − 0)² = 1.
        let mut theta = [0.0; 6];
        theta[2] = std::f64::consts::FRAC_PI_2;
        assert!((batch_loss(&spec, &theta, &[pos.clone()], None).unwrap() - 1.0).abs() < 1e-12);

        // Two samples at ŷ = 1: losses 0 and 4 → mean 2. With ŷ = 0 for both: mean 1.
        assert_eq!(batch_loss(&spec, &[0.0; 6], &[pos.clone(), neg.clone()], None).unwrap(), 2.0);
        assert!(batch_loss(&spec, &[0.0; 6], &[], None).is_err());
        assert_eq!(squared_error(Label::Positive, 1.0) + squared_error(Label::Positive, 0.0), 1.0);
    }

    #[test]
    fn accuracy_examples() {
        let spec = build_ansatz(2, 1).unwrap();
        let pos = Sample::new(vec![1.0, 0.0], Label::Positive).unwrap();
        let neg = Sample::new(vec![1.0, 0.0], Label::Negative).unwrap();
        assert_eq!(accuracy(&spec, &[0.0; 6], &[pos.clone(), pos.clone()]).unwrap(), 100.0);
        assert_eq!(accuracy(&spec, &[0.0; 6], &[neg.clone()]).unwrap(), 0.0);
        // ŷ = 0 counts as +1.
        assert_eq!(accuracy_from_predictions(&[Label::Positive], &[0.0]).unwrap(), 100.0);
        assert_eq!(accuracy_from_predictions(&[Label::Negative], &[0.0]).unwrap(), 0.0);
        assert!(accuracy(&spec, &[0.0; 6], &[]).is_err());
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::new(vec![], Label::Positive).is_err());
        assert!(Sample::new(vec![0.0, 0.0], Label::Positive).is_err());
        assert!(Label::try_from(0).is_err());
        assert_eq!(Label::try_from(-1).unwrap(), Label::Negative);
    }
}
