//! Dense state-vector simulation.
//!
//! Basis index convention: qubit 0 is the most significant bit, so on two
//! qubits `|10⟩` (qubit 0 set) is index 2. Rotations follow
//! `R_a(θ) = exp(-i θ/2 σ_a)` with the global phase retained.

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const MAX_QUBITS: usize = 14;

/// Rotation generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Single-qubit Pauli-Z measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observable {
    pub qubit: usize,
}

impl Observable {
    pub fn z(qubit: usize) -> Self {
        Self { qubit }
    }
}

/// Finite-shot measurement settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub shots: u64,
    pub seed: u64,
}

impl ShotConfig {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::argument("shot count must be at least 1"));
        }
        Ok(Self { shots, seed })
    }

    /// Same shot budget, different stream.
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// An `n`-qubit pure state stored as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Size(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::Index(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two and the
    /// vector must already be normalized to within `1e-10`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Size(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::numeric("non-finite amplitude"));
        }
        let state = Self { n_qubits, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::numeric(format!("state norm² {norm} is not 1")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    #[inline]
    fn stride(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Pure variant of [`StateVector::rotate`].
    pub fn apply_rotation(&self, qubit: usize, axis: Axis, angle: f64) -> Result<Self> {
        let mut out = self.clone();
        out.rotate(qubit, axis, angle)?;
        Ok(out)
    }

    /// Applies `R_axis(angle)` to `qubit` in place.
    pub fn rotate(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::numeric(format!("rotation angle {angle} is not finite")));
        }
        self.rotate_unchecked(qubit, axis, angle);
        Ok(())
    }

    pub(crate) fn rotate_unchecked(&mut self, qubit: usize, axis: Axis, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        let stride = self.stride(qubit);
        let dim = self.amps.len();
        match axis {
            Axis::X => {
                for block in (0..dim).step_by(2 * stride) {
                    let (lo, hi) = self.amps[block..block + 2 * stride].split_at_mut(stride);
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (x, y) = (*a, *b);
                        // c·x − i s·y and −i s·x + c·y
                        *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                        *b = Complex64::new(s * x.im + c * y.re, -s * x.re + c * y.im);
                    }
                }
            }
            Axis::Y => {
                for block in (0..dim).step_by(2 * stride) {
                    let (lo, hi) = self.amps[block..block + 2 * stride].split_at_mut(stride);
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = x * c - y * s;
                        *b = x * s + y * c;
                    }
                }
            }
            Axis::Z => {
                let lower = Complex64::new(c, -s);
                let upper = Complex64::new(c, s);
                for block in (0..dim).step_by(2 * stride) {
                    let (lo, hi) = self.amps[block..block + 2 * stride].split_at_mut(stride);
                    for a in lo.iter_mut() {
                        *a *= lower;
                    }
                    for b in hi.iter_mut() {
                        *b *= upper;
                    }
                }
            }
        }
    }

    /// Pure variant of [`StateVector::cnot`].
    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self> {
        let mut out = self.clone();
        out.cnot(control, target)?;
        Ok(out)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::argument(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        self.cnot_unchecked(control, target);
        Ok(())
    }

    pub(crate) fn cnot_unchecked(&mut self, control: usize, target: usize) {
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        for k in 0..self.amps.len() {
            if k & cmask != 0 && k & tmask == 0 {
                self.amps.swap(k, k | tmask);
            }
        }
    }

    /// Applies Pauli-Z to `qubit`.
    pub(crate) fn z_gate_unchecked(&mut self, qubit: usize) {
        let mask = self.stride(qubit);
        for (k, a) in self.amps.iter_mut().enumerate() {
            if k & mask != 0 {
                *a = -*a;
            }
        }
    }

    /// `Im⟨self|σ_axis(qubit)|other⟩`.
    pub(crate) fn pauli_overlap_im(&self, other: &StateVector, qubit: usize, axis: Axis) -> f64 {
        let mask = self.stride(qubit);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, l) in self.amps.iter().enumerate() {
            let set = k & mask != 0;
            let term = match axis {
                Axis::X => other.amps[k ^ mask],
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                Axis::Y => {
                    let v = other.amps[k ^ mask];
                    if set { Complex64::new(-v.im, v.re) } else { Complex64::new(v.im, -v.re) }
                }
                Axis::Z => {
                    if set { -other.amps[k] } else { other.amps[k] }
                }
            };
            acc += l.conj() * term;
        }
        acc.im
    }

    /// `⟨Z_q⟩ = Σ_k ±|a_k|²`, `+` where bit `q` of `k` is 0.
    pub fn expectation_z(&self, obs: Observable) -> Result<f64> {
        self.check_qubit(obs.qubit)?;
        Ok(self.z_unchecked(obs.qubit))
    }

    pub(crate) fn z_unchecked(&self, qubit: usize) -> f64 {
        let mask = self.stride(qubit);
        let value: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if k & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum();
        value.clamp(-1.0, 1.0)
    }

    /// Shot estimate of `⟨Z_q⟩`: the mean of `shots` ±1 outcomes.
    pub fn sample_expectation(&self, obs: Observable, cfg: ShotConfig) -> Result<f64> {
        let exact = self.expectation_z(obs)?;
        sample_from_expectation(exact, cfg)
    }
}

/// Draws the shot-averaged outcome of a ±1 observable whose exact mean is
/// `exact`. The count of `+1` outcomes is binomial with `p = (1 + exact)/2`.
pub fn sample_from_expectation(exact: f64, cfg: ShotConfig) -> Result<f64> {
    if cfg.shots == 0 {
        return Err(Error::argument("shot count must be at least 1"));
    }
    let p_plus = (0.5 * (1.0 + exact)).clamp(0.0, 1.0);
    let binomial = Binomial::new(cfg.shots, p_plus)
        .map_err(|e| Error::numeric(format!("binomial sampler: {e}")))?;
    let plus = binomial.sample(&mut rng_from_seed(cfg.seed));
    let m = cfg.shots as f64;
    Ok((2.0 * plus as f64 - m) / m)
}

/// Free-function form of [`StateVector::apply_rotation`].
pub fn apply_rotation(state: &StateVector, qubit: usize, axis: Axis, angle: f64) -> Result<StateVector> {
    state.apply_rotation(qubit, axis, angle)
}

pub fn apply_cnot(state: &StateVector, control: usize, target: usize) -> Result<StateVector> {
    state.apply_cnot(control, target)
}

pub fn expectation_z(state: &StateVector, obs: Observable) -> Result<f64> {
    state.expectation_z(obs)
}

pub fn sample_expectation(state: &StateVector, obs: Observable, cfg: ShotConfig) -> Result<f64> {
    state.sample_expectation(obs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_amps(state: &StateVector, expected: &[Complex64], tol: f64) {
        assert_eq!(state.dim(), expected.len());
        for (k, (a, e)) in state.amplitudes().iter().zip(expected).enumerate() {
            assert!((a - e).norm() <= tol, "amplitude {k}: {a} vs {e}");
        }
    }

    #[test]
    fn zero_state_sizes() {
        assert_amps(&zero_state(1).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)], 0.0);
        let s = zero_state(2).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0, 0.0)));
        assert!(matches!(zero_state(0), Err(Error::Size(_))));
        assert!(matches!(zero_state(15), Err(Error::Size(_))));
        assert!(zero_state(14).is_ok());
    }

    #[test]
    fn closed_form_rotations() {
        let s = zero_state(1).unwrap();
        assert_amps(&s.apply_rotation(0, Axis::Y, PI).unwrap(), &[c(0.0, 0.0), c(1.0, 0.0)], 1e-15);
        assert_amps(
            &s.apply_rotation(0, Axis::X, FRAC_PI_2).unwrap(),
            &[c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)],
            1e-15,
        );
        let plus = s.apply_rotation(0, Axis::Y, 0.7).unwrap();
        assert_eq!(plus.apply_rotation(0, Axis::Z, 0.0).unwrap(), plus);
    }

    #[test]
    fn rotation_errors() {
        let s = zero_state(2).unwrap();
        assert!(matches!(s.apply_rotation(2, Axis::X, 0.1), Err(Error::Index(_))));
        assert!(matches!(s.apply_rotation(0, Axis::X, f64::NAN), Err(Error::Numeric(_))));
        assert!(matches!(s.apply_rotation(0, Axis::X, f64::INFINITY), Err(Error::Numeric(_))));
    }

    #[test]
    fn cnot_truth_table_and_bell() {
        // |10⟩ has qubit 0 set: index 2.
        let s = StateVector::basis(2, 2).unwrap();
        assert_eq!(s.apply_cnot(0, 1).unwrap(), StateVector::basis(2, 3).unwrap());
        let z = zero_state(2).unwrap();
        assert_eq!(z.apply_cnot(0, 1).unwrap(), z);

        let sup = StateVector::from_amplitudes(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
        ])
        .unwrap();
        assert_amps(
            &sup.apply_cnot(0, 1).unwrap(),
            &[c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            0.0,
        );
        assert!(matches!(z.apply_cnot(1, 1), Err(Error::Argument(_))));
        assert!(matches!(z.apply_cnot(0, 2), Err(Error::Index(_))));
    }

    #[test]
    fn z_expectations() {
        let s = zero_state(1).unwrap();
        assert_eq!(s.expectation_z(Observable::z(0)).unwrap(), 1.0);
        let e = s.apply_rotation(0, Axis::Y, FRAC_PI_2).unwrap().expectation_z(Observable::z(0)).unwrap();
        assert!(e.abs() < 1e-12);
        let e = s.apply_rotation(0, Axis::Y, FRAC_PI_3).unwrap().expectation_z(Observable::z(0)).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        // Qubit 1 is the low bit: |01⟩ has ⟨Z_0⟩ = 1, ⟨Z_1⟩ = −1.
        let s = StateVector::basis(2, 1).unwrap();
        assert_eq!(s.expectation_z(Observable::z(0)).unwrap(), 1.0);
        assert_eq!(s.expectation_z(Observable::z(1)).unwrap(), -1.0);
        assert!(s.expectation_z(Observable::z(2)).is_err());
    }

    #[test]
    fn deterministic_outcome_states_sample_exactly() {
        let zero = zero_state(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        for (shots, seed) in [(1, 0), (17, 3), (1000, 99)] {
            let cfg = ShotConfig::new(shots, seed).unwrap();
            assert_eq!(zero.sample_expectation(Observable::z(0), cfg).unwrap(), 1.0);
            assert_eq!(one.sample_expectation(Observable::z(0), cfg).unwrap(), -1.0);
        }
        assert!(ShotConfig::new(0, 1).is_err());
    }

    #[test]
    fn equator_state_million_shots() {
        let s = zero_state(1).unwrap().apply_rotation(0, Axis::Y, FRAC_PI_2).unwrap();
        let cfg = ShotConfig::new(1_000_000, 2024).unwrap();
        let v = s.sample_expectation(Observable::z(0), cfg).unwrap();
        assert!(v.abs() < 0.005, "{v}");
        assert_eq!(v, s.sample_expectation(Observable::z(0), cfg).unwrap());
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(0.0, 1.0), c(0.0, 0.0)]).is_ok());
    }
}
