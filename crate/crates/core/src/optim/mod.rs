//! Optimizers sharing one step interface over a generic [`Objective`].
//!
//! The negative-learning-rate optimizer tries a descent step and, if the
//! mini-batch cost rises, moves *along* the gradient by `η′` instead.
//! Baselines: plain SGD, momentum, RMSProp, Adam, Armijo backtracking,
//! random perturbation on violation, and plateau-triggered re-initialization.

mod baselines;
mod circuit;
mod nlr;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use baselines::{
    adam_step, armijo_backtrack_step, momentum_step, perturbation_step, random_reinit_policy, rmsprop_step,
    sgd_step, AdamState, ArmijoConfig, MomentumState, NoiseKind, PerturbationConfig, PlateauDetector,
    RmsPropState, SigmaPolicy,
};
pub use circuit::CircuitObjective;
pub use nlr::{effective_eta_prime, guideline_eta_prime, nlr_step, GuidelineReport, NlrConfig, Schedule};
pub use train::{train, TrainTrace};

/// A differentiable cost. Stochastic objectives (mini-batches, noisy
/// gradients) keep their own seeded state, so `&mut self` is required.
pub trait Objective {
    fn dimension(&self) -> usize;

    /// Starts a new optimizer step; mini-batch objectives draw their batch here.
    fn resample(&mut self) -> Result<()> {
        Ok(())
    }

    fn evaluate(&mut self, theta: &[f64]) -> Result<f64>;

    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Cost and gradient at one point. Override when both share work.
    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let loss = self.evaluate(theta)?;
        Ok((loss, self.gradient(theta)?))
    }

    /// Reporting loss over the whole training set, when that differs from
    /// the step loss.
    fn full_loss(&mut self, _theta: &[f64]) -> Option<Result<f64>> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &mut T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn resample(&mut self) -> Result<()> {
        (**self).resample()
    }
    fn evaluate(&mut self, theta: &[f64]) -> Result<f64> {
        (**self).evaluate(theta)
    }
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        (**self).gradient(theta)
    }
    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).loss_and_gradient(theta)
    }
    fn full_loss(&mut self, theta: &[f64]) -> Option<Result<f64>> {
        (**self).full_loss(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Unconditional update (SGD, momentum, RMSProp, Adam).
    Descent,
    /// Tentative descent kept because the cost did not rise.
    DescentAccepted,
    /// Tentative descent rejected; moved by `+η′·g`.
    Reversal,
    /// Tentative descent rejected; moved by a random perturbation.
    Perturbation,
    /// Armijo test failed at the initial step and a shorter one was taken.
    Backtracked,
    /// Plateau detector fired; parameters re-sampled.
    Reinit,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Descent => "descent",
            StepKind::DescentAccepted => "descent_accepted",
            StepKind::Reversal => "reversal",
            StepKind::Perturbation => "perturbation",
            StepKind::Backtracked => "backtracked",
            StepKind::Reinit => "reinit",
        }
    }

    /// Whether the full tentative descent step failed its acceptance test.
    pub fn is_violation(self) -> bool {
        matches!(self, StepKind::Reversal | StepKind::Perturbation | StepKind::Backtracked)
    }
}

/// Outcome of one optimizer step. All losses are on the step's mini-batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub kind: StepKind,
    pub loss_before: f64,
    /// Cost at `θ − η·g` for optimizers that test a tentative step.
    pub tentative_loss: Option<f64>,
    pub loss_after: f64,
    pub grad_norm: f64,
    /// `‖θ_{t+1} − θ_t‖`.
    pub displacement: f64,
}

/// Stateful optimizer driven by [`train`].
pub trait Optimizer {
    fn name(&self) -> &'static str;

    /// Advances `theta` by one step; `step` is the zero-based iteration.
    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, step: usize) -> Result<StepEvent>;
}

/// Every optimizer the harness can construct by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { eta: f64 },
    Momentum { eta: f64, beta: f64 },
    Rmsprop { eta: f64, decay: f64, eps: f64 },
    Adam { eta: f64, beta1: f64, beta2: f64, eps: f64 },
    Nlr(NlrConfig),
    Backtrack(ArmijoConfig),
    Perturb(PerturbationConfig),
    Reinit { eta: f64, detector: PlateauDetector, seed: u64 },
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd { .. } => "sgd",
            OptimizerConfig::Momentum { .. } => "momentum",
            OptimizerConfig::Rmsprop { .. } => "rmsprop",
            OptimizerConfig::Adam { .. } => "adam",
            OptimizerConfig::Nlr(_) => "nlr",
            OptimizerConfig::Backtrack(_) => "backtrack",
            OptimizerConfig::Perturb(p) => match p.noise {
                NoiseKind::Gaussian => "perturb_gauss",
                NoiseKind::Uniform => "perturb_uniform",
            },
            OptimizerConfig::Reinit { .. } => "reinit",
        }
    }

    /// Same configuration with its internal random stream (if any) replaced.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            OptimizerConfig::Perturb(cfg) => cfg.seed = seed,
            OptimizerConfig::Reinit { seed: s, .. } => *s = seed,
            _ => {}
        }
        out
    }

    pub fn build(&self) -> Result<Box<dyn Optimizer + Send>> {
        Ok(match self {
            OptimizerConfig::Sgd { eta } => Box::new(baselines::Sgd::new(*eta)?),
            OptimizerConfig::Momentum { eta, beta } => Box::new(MomentumState::new(*eta, *beta)?),
            OptimizerConfig::Rmsprop { eta, decay, eps } => Box::new(RmsPropState::new(*eta, *decay, *eps)?),
            OptimizerConfig::Adam { eta, beta1, beta2, eps } => Box::new(AdamState::new(*eta, *beta1, *beta2, *eps)?),
            OptimizerConfig::Nlr(cfg) => Box::new(nlr::Nlr::new(cfg.clone())?),
            OptimizerConfig::Backtrack(cfg) => Box::new(baselines::Armijo::new(*cfg)?),
            OptimizerConfig::Perturb(cfg) => Box::new(baselines::Perturbation::new(cfg.clone())?),
            OptimizerConfig::Reinit { eta, detector, seed } => Box::new(baselines::Reinit::new(*eta, *detector, *seed)?),
        })
    }
}

pub(crate) fn axpy(theta: &[f64], scale: f64, dir: &[f64]) -> Vec<f64> {
    theta.iter().zip(dir).map(|(t, d)| t + scale * d).collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
