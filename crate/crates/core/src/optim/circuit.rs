use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, Normal};

use super::Objective;
use crate::ansatz::{CircuitSpec, Sample};
use crate::autodiff::{batch_loss_encoded, batch_loss_encoded_shots, encode_batch, loss_and_gradient_encoded, EncodedSample};
use crate::error::{Error, Result};
use crate::qsim::ShotConfig;
use crate::rng::{derive_seed, derived_rng, Rng};

/// Mini-batch squared-error loss of a circuit classifier.
///
/// `resample` draws `batch_size` training samples without replacement; every
/// `evaluate`/`gradient` call until the next `resample` uses that batch.
/// Shot streams are derived from `(shot seed, step, call index)`.
pub struct CircuitObjective {
    spec: CircuitSpec,
    train: Vec<EncodedSample>,
    batch_size: usize,
    batch_rng: Rng,
    batch: Vec<EncodedSample>,
    shots: Option<ShotConfig>,
    gradient_noise_std: f64,
    noise_rng: Rng,
    step: u64,
    calls: u64,
}

impl CircuitObjective {
    pub fn new(spec: CircuitSpec, train: &[Sample], batch_size: usize, seed: u64, shots: Option<ShotConfig>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::argument("training set is empty"));
        }
        if batch_size == 0 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        Ok(Self {
            spec,
            train: encode_batch(train, spec.n_qubits())?,
            batch_size: batch_size.min(train.len()),
            batch_rng: derived_rng(seed, &[0xBA7C]),
            batch: Vec::new(),
            shots,
            gradient_noise_std: 0.0,
            noise_rng: derived_rng(seed, &[0x6A55]),
            step: 0,
            calls: 0,
        })
    }

    /// Adds i.i.d. `N(0, std²)` noise to every gradient component.
    pub fn with_gradient_noise(mut self, std: f64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::argument(format!("gradient noise must be non-negative, got {std}")));
        }
        self.gradient_noise_std = std;
        Ok(self)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    fn ensure_batch(&mut self) -> Result<()> {
        if self.batch.is_empty() {
            self.resample()?;
        }
        Ok(())
    }

    fn next_shots(&mut self) -> Option<ShotConfig> {
        let call = self.calls;
        self.calls += 1;
        self.shots.map(|cfg| cfg.with_seed(derive_seed(cfg.seed, &[self.step, call])))
    }
}

impl Objective for CircuitObjective {
    fn dimension(&self) -> usize {
        self.spec.parameter_count()
    }

    fn resample(&mut self) -> Result<()> {
        let picks = sample_indices(&mut self.batch_rng, self.train.len(), self.batch_size);
        self.batch = picks.iter().map(|i| self.train[i].clone()).collect();
        self.step += 1;
        self.calls = 0;
        Ok(())
    }

    fn evaluate(&mut self, theta: &[f64]) -> Result<f64> {
        self.ensure_batch()?;
        match self.next_shots() {
            None => batch_loss_encoded(&self.spec, theta, &self.batch),
            Some(cfg) => batch_loss_encoded_shots(&self.spec, theta, &self.batch, cfg),
        }
    }

    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(theta)?.1)
    }

    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.ensure_batch()?;
        let shots = self.next_shots();
        let (loss, mut grad) = loss_and_gradient_encoded(&self.spec, theta, &self.batch, shots)?;
        if self.gradient_noise_std > 0.0 {
            let normal = Normal::new(0.0, self.gradient_noise_std).map_err(|e| Error::numeric(e.to_string()))?;
            for g in grad.iter_mut() {
                *g += normal.sample(&mut self.noise_rng);
            }
        }
        Ok((loss, grad))
    }

    fn full_loss(&mut self, theta: &[f64]) -> Option<Result<f64>> {
        Some(batch_loss_encoded(&self.spec, theta, &self.train))
    }
}
