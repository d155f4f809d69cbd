//! Comparison optimizers.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{axpy, distance, Objective, Optimizer, StepEvent, StepKind};
use crate::autodiff::gradient_norm;
use crate::error::{ensure_finite, Error, Result};
use crate::rng::{derived_rng, Rng};

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::argument(format!("{name} must be positive, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::argument(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn checked_gradient(objective: &mut dyn Objective, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_finite(theta, "theta")?;
    let (loss, g) = objective.loss_and_gradient(theta)?;
    ensure_finite(&g, "gradient")?;
    Ok((loss, g))
}

fn finish(
    objective: &mut dyn Objective,
    theta: &[f64],
    next: Vec<f64>,
    kind: StepKind,
    loss_before: f64,
    grad: &[f64],
) -> Result<(Vec<f64>, StepEvent)> {
    ensure_finite(&next, "updated parameters")?;
    let loss_after = objective.evaluate(&next)?;
    let event = StepEvent {
        kind,
        loss_before,
        tentative_loss: None,
        loss_after,
        grad_norm: gradient_norm(grad),
        displacement: distance(&next, theta),
    };
    Ok((next, event))
}

/// `θ − η·g`.
pub fn sgd_step(objective: &mut dyn Objective, theta: &[f64], eta: f64) -> Result<(Vec<f64>, StepEvent)> {
    let (loss, g) = checked_gradient(objective, theta)?;
    let next = axpy(theta, -eta, &g);
    finish(objective, theta, next, StepKind::Descent, loss, &g)
}

pub(super) struct Sgd {
    eta: f64,
}

impl Sgd {
    pub(super) fn new(eta: f64) -> Result<Self> {
        Ok(Self { eta: positive("eta", eta)? })
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, ev) = sgd_step(objective, theta, self.eta)?;
        *theta = next;
        Ok(ev)
    }
}

/// Heavy-ball momentum: `v ← β·v + g`, `θ ← θ − η·v`.
#[derive(Debug, Clone)]
pub struct MomentumState {
    pub eta: f64,
    pub beta: f64,
    velocity: Vec<f64>,
}

impl MomentumState {
    pub fn new(eta: f64, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::argument(format!("momentum must lie in [0, 1), got {beta}")));
        }
        Ok(Self { eta: positive("eta", eta)?, beta, velocity: Vec::new() })
    }
}

pub fn momentum_step(objective: &mut dyn Objective, theta: &[f64], state: &mut MomentumState) -> Result<(Vec<f64>, StepEvent)> {
    let (loss, g) = checked_gradient(objective, theta)?;
    if state.velocity.len() != g.len() {
        state.velocity = vec![0.0; g.len()];
    }
    for (v, gi) in state.velocity.iter_mut().zip(&g) {
        *v = state.beta * *v + gi;
    }
    let next = axpy(theta, -state.eta, &state.velocity);
    finish(objective, theta, next, StepKind::Descent, loss, &g)
}

impl Optimizer for MomentumState {
    fn name(&self) -> &'static str {
        "momentum"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, ev) = momentum_step(objective, theta, self)?;
        *theta = next;
        Ok(ev)
    }
}

/// RMSProp: `s ← ρ·s + (1−ρ)·g²`, `θ ← θ − η·g/(√s + ε)`.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    pub eta: f64,
    pub decay: f64,
    pub eps: f64,
    sq_avg: Vec<f64>,
}

impl RmsPropState {
    pub fn new(eta: f64, decay: f64, eps: f64) -> Result<Self> {
        Ok(Self {
            eta: positive("eta", eta)?,
            decay: unit_open("decay", decay)?,
            eps: positive("eps", eps)?,
            sq_avg: Vec::new(),
        })
    }
}

pub fn rmsprop_step(objective: &mut dyn Objective, theta: &[f64], state: &mut RmsPropState) -> Result<(Vec<f64>, StepEvent)> {
    let (loss, g) = checked_gradient(objective, theta)?;
    if state.sq_avg.len() != g.len() {
        state.sq_avg = vec![0.0; g.len()];
    }
    let mut next = theta.to_vec();
    for ((t, s), gi) in next.iter_mut().zip(state.sq_avg.iter_mut()).zip(&g) {
        *s = state.decay * *s + (1.0 - state.decay) * gi * gi;
        *t -= state.eta * gi / (s.sqrt() + state.eps);
    }
    finish(objective, theta, next, StepKind::Descent, loss, &g)
}

impl Optimizer for RmsPropState {
    fn name(&self) -> &'static str {
        "rmsprop"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, ev) = rmsprop_step(objective, theta, self)?;
        *theta = next;
        Ok(ev)
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(eta: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        Ok(Self {
            eta: positive("eta", eta)?,
            beta1: unit_open("beta1", beta1)?,
            beta2: unit_open("beta2", beta2)?,
            eps: positive("eps", eps)?,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        })
    }
}

pub fn adam_step(objective: &mut dyn Objective, theta: &[f64], state: &mut AdamState) -> Result<(Vec<f64>, StepEvent)> {
    let (loss, g) = checked_gradient(objective, theta)?;
    if state.m.len() != g.len() {
        state.m = vec![0.0; g.len()];
        state.v = vec![0.0; g.len()];
        state.t = 0;
    }
    state.t = state.t.saturating_add(1);
    let c1 = 1.0 - state.beta1.powi(state.t);
    let c2 = 1.0 - state.beta2.powi(state.t);
    let mut next = theta.to_vec();
    for (i, gi) in g.iter().enumerate() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * gi;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * gi * gi;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        next[i] -= state.eta * m_hat / (v_hat.sqrt() + state.eps);
    }
    finish(objective, theta, next, StepKind::Descent, loss, &g)
}

impl Optimizer for AdamState {
    fn name(&self) -> &'static str {
        "adam"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, ev) = adam_step(objective, theta, self)?;
        *theta = next;
        Ok(ev)
    }
}

/// Descent-only backtracking with the Armijo sufficient-decrease test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoConfig {
    pub eta_init: f64,
    pub c: f64,
    pub shrink: f64,
}

impl ArmijoConfig {
    pub const MAX_SHRINKS: u32 = 30;

    pub fn validate(&self) -> Result<()> {
        positive("eta_init", self.eta_init)?;
        unit_open("c", self.c)?;
        unit_open("shrink", self.shrink)?;
        Ok(())
    }
}

/// Shrinks the trial step from `eta_init` until
/// `C(θ − η̃g) ≤ C(θ) − c·η̃·‖g‖²`. After [`ArmijoConfig::MAX_SHRINKS`]
/// failed shrinks the step is zero. Returns the new point, the accepted
/// step size and the event.
pub fn armijo_backtrack_step(
    objective: &mut dyn Objective,
    theta: &[f64],
    cfg: &ArmijoConfig,
) -> Result<(Vec<f64>, f64, StepEvent)> {
    cfg.validate()?;
    let (loss_before, g) = checked_gradient(objective, theta)?;
    let g_sq: f64 = g.iter().map(|v| v * v).sum();
    let mut step = cfg.eta_init;
    let mut first_trial = None;
    let mut accepted = None;
    for _ in 0..=ArmijoConfig::MAX_SHRINKS {
        let trial = axpy(theta, -step, &g);
        let cost = objective.evaluate(&trial)?;
        first_trial.get_or_insert(cost);
        if cost <= loss_before - cfg.c * step * g_sq {
            accepted = Some((trial, cost));
            break;
        }
        step *= cfg.shrink;
    }
    let (next, loss_after, step) = match accepted {
        Some((trial, cost)) => (trial, cost, step),
        None => (theta.to_vec(), loss_before, 0.0),
    };
    let kind = if step == cfg.eta_init { StepKind::DescentAccepted } else { StepKind::Backtracked };
    let event = StepEvent {
        kind,
        loss_before,
        tentative_loss: first_trial,
        loss_after,
        grad_norm: g_sq.sqrt(),
        displacement: distance(&next, theta),
    };
    Ok((next, step, event))
}

pub(super) struct Armijo {
    cfg: ArmijoConfig,
}

impl Armijo {
    pub(super) fn new(cfg: ArmijoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl Optimizer for Armijo {
    fn name(&self) -> &'static str {
        "backtrack"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, _, ev) = armijo_backtrack_step(objective, theta, &self.cfg)?;
        *theta = next;
        Ok(ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N(0, σ²)` per component.
    Gaussian,
    /// `U[−σ√3, σ√3]` per component (variance `σ²`).
    Uniform,
}

/// How the per-component perturbation scale `σ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaPolicy {
    Fixed { sigma: f64 },
    /// `σ = η′·mean‖g‖/√dim`, with the mean taken over the first `warmup`
    /// gradients (and over those seen so far while still warming up).
    Matched { eta_prime: f64, warmup: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub eta: f64,
    pub noise: NoiseKind,
    pub sigma: SigmaPolicy,
    pub seed: u64,
}

/// Draws one perturbation vector with per-component variance `σ²`.
pub(crate) fn draw_perturbation(kind: NoiseKind, sigma: f64, dim: usize, rng: &mut Rng) -> Vec<f64> {
    match kind {
        NoiseKind::Gaussian => (0..dim)
            .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect(),
        NoiseKind::Uniform => {
            let half = sigma * 3f64.sqrt();
            if half == 0.0 {
                return vec![0.0; dim];
            }
            let dist = Uniform::new_inclusive(-half, half).expect("finite bounds");
            (0..dim).map(|_| dist.sample(rng)).collect()
        }
    }
}

/// Tentative descent as in NLR; on violation `θ + ξ` with random `ξ`.
pub fn perturbation_step(
    objective: &mut dyn Objective,
    theta: &[f64],
    eta: f64,
    noise: NoiseKind,
    sigma: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, StepEvent)> {
    positive("sigma", sigma)?;
    let (loss_before, g) = checked_gradient(objective, theta)?;
    perturbation_from_gradient(objective, theta, eta, noise, sigma, rng, loss_before, &g)
}

#[allow(clippy::too_many_arguments)]
fn perturbation_from_gradient(
    objective: &mut dyn Objective,
    theta: &[f64],
    eta: f64,
    noise: NoiseKind,
    sigma: f64,
    rng: &mut Rng,
    loss_before: f64,
    g: &[f64],
) -> Result<(Vec<f64>, StepEvent)> {
    let tentative = axpy(theta, -eta, g);
    let tentative_loss = objective.evaluate(&tentative)?;
    let (next, kind, loss_after) = if tentative_loss <= loss_before {
        (tentative, StepKind::DescentAccepted, tentative_loss)
    } else {
        let xi = draw_perturbation(noise, sigma, theta.len(), rng);
        let moved = axpy(theta, 1.0, &xi);
        let after = objective.evaluate(&moved)?;
        (moved, StepKind::Perturbation, after)
    };
    let event = StepEvent {
        kind,
        loss_before,
        tentative_loss: Some(tentative_loss),
        loss_after,
        grad_norm: gradient_norm(g),
        displacement: distance(&next, theta),
    };
    Ok((next, event))
}

pub(super) struct Perturbation {
    cfg: PerturbationConfig,
    rng: Rng,
    norm_sum: f64,
    norm_count: usize,
}

impl Perturbation {
    pub(super) fn new(cfg: PerturbationConfig) -> Result<Self> {
        positive("eta", cfg.eta)?;
        match cfg.sigma {
            SigmaPolicy::Fixed { sigma } => {
                positive("sigma", sigma)?;
            }
            SigmaPolicy::Matched { eta_prime, warmup } => {
                positive("eta_prime", eta_prime)?;
                if warmup == 0 {
                    return Err(Error::argument("warmup must be at least 1 step"));
                }
            }
        }
        let rng = derived_rng(cfg.seed, &[0x9E27]);
        Ok(Self { cfg, rng, norm_sum: 0.0, norm_count: 0 })
    }

    fn sigma(&mut self, grad_norm: f64, dim: usize) -> f64 {
        match self.cfg.sigma {
            SigmaPolicy::Fixed { sigma } => sigma,
            SigmaPolicy::Matched { eta_prime, warmup } => {
                if self.norm_count < warmup {
                    self.norm_sum += grad_norm;
                    self.norm_count += 1;
                }
                eta_prime * (self.norm_sum / self.norm_count as f64) / (dim as f64).sqrt()
            }
        }
    }
}

impl Optimizer for Perturbation {
    fn name(&self) -> &'static str {
        match self.cfg.noise {
            NoiseKind::Gaussian => "perturb_gauss",
            NoiseKind::Uniform => "perturb_uniform",
        }
    }

    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (loss_before, g) = checked_gradient(objective, theta)?;
        let sigma = self.sigma(gradient_norm(&g), g.len());
        let (next, ev) =
            perturbation_from_gradient(objective, theta, self.cfg.eta, self.cfg.noise, sigma, &mut self.rng, loss_before, &g)?;
        *theta = next;
        Ok(ev)
    }
}

/// Fires when the mean gradient norm over the last `window` steps drops
/// below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauDetector {
    pub window: usize,
    pub threshold: f64,
}

impl Default for PlateauDetector {
    fn default() -> Self {
        Self { window: 20, threshold: 1e-3 }
    }
}

impl PlateauDetector {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::argument("detector window must be at least 1"));
        }
        positive("detector threshold", self.threshold)?;
        Ok(())
    }

    pub fn fires(&self, history: &VecDeque<f64>) -> bool {
        history.len() >= self.window
            && history.iter().rev().take(self.window).sum::<f64>() / (self.window as f64) < self.threshold
    }
}

/// SGD step, unless the detector fires on `history` (which should already
/// include this step's gradient norm); then every parameter is redrawn from
/// `U[−π, π]` and the history is cleared.
pub fn random_reinit_policy(
    objective: &mut dyn Objective,
    theta: &[f64],
    eta: f64,
    detector: &PlateauDetector,
    history: &mut VecDeque<f64>,
    rng: &mut Rng,
) -> Result<(Vec<f64>, StepEvent)> {
    detector.validate()?;
    let (loss_before, g) = checked_gradient(objective, theta)?;
    history.push_back(gradient_norm(&g));
    while history.len() > detector.window {
        history.pop_front();
    }
    if detector.fires(history) {
        history.clear();
        let next: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-PI..=PI)).collect();
        finish(objective, theta, next, StepKind::Reinit, loss_before, &g)
    } else {
        let next = axpy(theta, -eta, &g);
        finish(objective, theta, next, StepKind::Descent, loss_before, &g)
    }
}

pub(super) struct Reinit {
    eta: f64,
    detector: PlateauDetector,
    history: VecDeque<f64>,
    rng: Rng,
}

impl Reinit {
    pub(super) fn new(eta: f64, detector: PlateauDetector, seed: u64) -> Result<Self> {
        detector.validate()?;
        Ok(Self {
            eta: positive("eta", eta)?,
            detector,
            history: VecDeque::new(),
            rng: derived_rng(seed, &[0x4E17]),
        })
    }
}

impl Optimizer for Reinit {
    fn name(&self) -> &'static str {
        "reinit"
    }
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, _step: usize) -> Result<StepEvent> {
        let (next, ev) = random_reinit_policy(objective, theta, self.eta, &self.detector, &mut self.history, &mut self.rng)?;
        *theta = next;
        Ok(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::test_objectives::{AlwaysWorse, Quadratic};
    use crate::optim::{nlr_step, NlrConfig};
    use crate::rng::rng_from_seed;

    #[test]
    fn sgd_on_quadratic() {
        let (t, ev) = sgd_step(&mut Quadratic { dim: 1 }, &[1.0], 0.1).unwrap();
        assert!((t[0] - 0.8).abs() < 1e-15);
        assert_eq!(ev.kind, StepKind::Descent);
    }

    #[test]
    fn momentum_cold_start_equals_sgd() {
        let mut st = MomentumState::new(0.1, 0.9).unwrap();
        let (a, _) = momentum_step(&mut Quadratic { dim: 2 }, &[1.0, -0.5], &mut st).unwrap();
        let (b, _) = sgd_step(&mut Quadratic { dim: 2 }, &[1.0, -0.5], 0.1).unwrap();
        assert_eq!(a, b);
        // Second step accumulates: v = 0.9·g0 + g1.
        let (c, _) = momentum_step(&mut Quadratic { dim: 2 }, &a, &mut st).unwrap();
        let expected = a[0] - 0.1 * (0.9 * 2.0 + 2.0 * a[0]);
        assert!((c[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_eta_times_sign() {
        for scale in [1e-3, 1.0, 1e4] {
            let mut st = AdamState::new(0.01, 0.9, 0.999, 1e-8).unwrap();
            let theta = [scale, -scale];
            let (next, _) = adam_step(&mut Quadratic { dim: 2 }, &theta, &mut st).unwrap();
            assert!(((theta[0] - next[0]) / 0.01 - 1.0).abs() < 1e-5, "{scale}");
            assert!(((next[1] - theta[1]) / 0.01 - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn rmsprop_first_step() {
        // s = 0.1·g², step = η·g/√s = η/√0.1.
        let mut st = RmsPropState::new(0.01, 0.9, 1e-8).unwrap();
        let (next, _) = rmsprop_step(&mut Quadratic { dim: 1 }, &[2.0], &mut st).unwrap();
        assert!((2.0 - next[0] - 0.01 / 0.1f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn armijo_examples() {
        let cfg = ArmijoConfig { eta_init: 0.1, c: 0.1, shrink: 0.5 };
        let (t, step, ev) = armijo_backtrack_step(&mut Quadratic { dim: 1 }, &[1.0], &cfg).unwrap();
        assert_eq!(step, 0.1);
        assert!((t[0] - 0.8).abs() < 1e-15);
        assert_eq!(ev.kind, StepKind::DescentAccepted);

        let (t, step, ev) = armijo_backtrack_step(&mut Quadratic { dim: 2 }, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(ev.displacement, 0.0);
        assert_eq!(t, vec![0.0, 0.0]);
        assert!(step >= 0.0);

        let mut worse = AlwaysWorse { origin: vec![0.3, 0.3] };
        let (t, step, ev) = armijo_backtrack_step(&mut worse, &[0.3, 0.3], &cfg).unwrap();
        assert_eq!(step, 0.0);
        assert_eq!(t, vec![0.3, 0.3]);
        assert_eq!(ev.kind, StepKind::Backtracked);

        // Overshooting initial step gets shortened.
        let big = ArmijoConfig { eta_init: 1.5, c: 1e-4, shrink: 0.5 };
        let (_, step, ev) = armijo_backtrack_step(&mut Quadratic { dim: 1 }, &[1.0], &big).unwrap();
        assert_eq!(step, 0.75);
        assert_eq!(ev.kind, StepKind::Backtracked);

        assert!(armijo_backtrack_step(&mut Quadratic { dim: 1 }, &[1.0], &ArmijoConfig { c: 1.0, ..cfg }).is_err());
    }

    #[test]
    fn perturbation_without_violation_matches_sgd() {
        let mut rng = rng_from_seed(1);
        let mut theta = vec![1.0, -2.0];
        let mut reference = theta.clone();
        for _ in 0..20 {
            let (next, ev) = perturbation_step(&mut Quadratic { dim: 2 }, &theta, 0.1, NoiseKind::Gaussian, 0.5, &mut rng).unwrap();
            assert_eq!(ev.kind, StepKind::DescentAccepted);
            theta = next;
            reference = sgd_step(&mut Quadratic { dim: 2 }, &reference, 0.1).unwrap().0;
        }
        assert_eq!(theta, reference);
    }

    #[test]
    fn perturbation_is_seed_deterministic() {
        let run = |seed| {
            let mut rng = rng_from_seed(seed);
            perturbation_step(&mut Quadratic { dim: 3 }, &[1.0, 1.0, 1.0], 1.5, NoiseKind::Uniform, 0.2, &mut rng).unwrap()
        };
        let (a, ev) = run(4);
        assert_eq!(ev.kind, StepKind::Perturbation);
        assert_eq!(a, run(4).0);
        assert_ne!(a, run(5).0);
    }

    #[test]
    fn perturbation_variance_matches_target() {
        // Monte Carlo over 10⁴ draws: E‖ξ‖² = dim·σ² for both kinds.
        let (dim, sigma) = (10, 0.02);
        for kind in [NoiseKind::Gaussian, NoiseKind::Uniform] {
            let mut rng = rng_from_seed(77);
            let n = 10_000;
            let mean: f64 = (0..n)
                .map(|_| draw_perturbation(kind, sigma, dim, &mut rng).iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
                / n as f64;
            let target = dim as f64 * sigma * sigma;
            assert!((mean / target - 1.0).abs() < 0.05, "{kind:?}: {mean} vs {target}");
        }
    }

    #[test]
    fn matched_sigma_tracks_gradient_scale() {
        let cfg = PerturbationConfig {
            eta: 0.1,
            noise: NoiseKind::Gaussian,
            sigma: SigmaPolicy::Matched { eta_prime: 0.02, warmup: 3 },
            seed: 0,
        };
        let mut p = Perturbation::new(cfg).unwrap();
        assert!((p.sigma(4.0, 4) - 0.02 * 4.0 / 2.0).abs() < 1e-15);
        assert!((p.sigma(2.0, 4) - 0.02 * 3.0 / 2.0).abs() < 1e-15);
        p.sigma(0.0, 4);
        // Frozen after warm-up.
        assert!((p.sigma(100.0, 4) - 0.02 * 2.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn reinit_behaviour() {
        let detector = PlateauDetector { window: 3, threshold: 1e-3 };
        let mut rng = rng_from_seed(3);
        let mut history = VecDeque::new();
        // Large gradients: plain SGD.
        let mut theta = vec![1.0, 1.0];
        for _ in 0..5 {
            let (next, ev) = random_reinit_policy(&mut Quadratic { dim: 2 }, &theta, 0.1, &detector, &mut history, &mut rng).unwrap();
            assert_eq!(ev.kind, StepKind::Descent);
            assert_eq!(next, sgd_step(&mut Quadratic { dim: 2 }, &theta, 0.1).unwrap().0);
            theta = next;
        }
        // At the minimum the detector fires after a full window.
        let mut history = VecDeque::new();
        let mut kinds = Vec::new();
        let mut theta = vec![0.0, 0.0];
        for _ in 0..3 {
            let (next, ev) = random_reinit_policy(&mut Quadratic { dim: 2 }, &theta, 0.1, &detector, &mut history, &mut rng).unwrap();
            kinds.push(ev.kind);
            theta = next;
        }
        assert_eq!(kinds, vec![StepKind::Descent, StepKind::Descent, StepKind::Reinit]);
        assert!(theta.iter().all(|t| (-PI..=PI).contains(t)));
        assert!(history.is_empty());

        let draw = |seed| {
            let mut h: VecDeque<f64> = VecDeque::from(vec![0.0; 3]);
            let mut r = rng_from_seed(seed);
            random_reinit_policy(&mut Quadratic { dim: 4 }, &[0.0; 4], 0.1, &detector, &mut h, &mut r).unwrap().0
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn well_conditioned_quadratic_never_reverses() {
        let cfg = NlrConfig::new(0.1, 0.2).unwrap();
        let mut a = vec![1.0, -3.0, 0.5];
        let mut b = a.clone();
        for t in 0..100 {
            let (next, ev) = nlr_step(&mut Quadratic { dim: 3 }, &a, &cfg, t).unwrap();
            assert_eq!(ev.kind, StepKind::DescentAccepted);
            a = next;
            b = sgd_step(&mut Quadratic { dim: 3 }, &b, 0.1).unwrap().0;
        }
        assert_eq!(a, b);
    }
}
