use serde::{Deserialize, Serialize};

use super::{axpy, distance, Objective, Optimizer, StepEvent, StepKind};
use crate::autodiff::gradient_norm;
use crate::error::{ensure_finite, Error, Result};

/// Step-size schedule applied to both `η` and `η′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// `η_t = η · t0 / (t0 + t)`.
    InverseTime { t0: f64 },
}

impl Schedule {
    pub fn factor(self, step: usize) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::InverseTime { t0 } => t0 / (t0 + step as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlrConfig {
    /// Descent rate `η`.
    pub eta: f64,
    /// Ascent rate `η′` used after a failed tentative descent. Zero leaves
    /// `θ` in place on a violation.
    pub eta_prime: f64,
    /// Hardware noise rate `ν`; the ascent rate is damped to `η′/(1 + νL)`.
    pub noise_rate_nu: f64,
    /// Circuit depth `L` in the damping factor.
    pub circuit_depth: usize,
    #[serde(default)]
    pub schedule: Schedule,
    /// When false every tentative descent is accepted (plain SGD).
    #[serde(default = "default_true")]
    pub reversal_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl NlrConfig {
    pub fn new(eta: f64, eta_prime: f64) -> Result<Self> {
        let cfg = Self {
            eta,
            eta_prime,
            noise_rate_nu: 0.0,
            circuit_depth: 1,
            schedule: Schedule::Constant,
            reversal_enabled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::argument(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eta_prime >= 0.0 && self.eta_prime.is_finite()) {
            return Err(Error::argument(format!("eta_prime must be non-negative, got {}", self.eta_prime)));
        }
        if !(self.noise_rate_nu >= 0.0 && self.noise_rate_nu.is_finite()) {
            return Err(Error::argument(format!("noise rate must be non-negative, got {}", self.noise_rate_nu)));
        }
        if self.circuit_depth == 0 {
            return Err(Error::argument("circuit depth must be at least 1"));
        }
        if let Schedule::InverseTime { t0 } = self.schedule {
            if t0.is_nan() || t0 <= 0.0 {
                return Err(Error::argument(format!("schedule t0 must be positive, got {t0}")));
            }
        }
        Ok(())
    }

    /// Ascent rate after noise damping.
    pub fn ascent_rate(&self) -> f64 {
        effective_eta_prime(self.eta_prime, self.noise_rate_nu, self.circuit_depth)
    }
}

/// `η′_eff = η′ / (1 + ν·L)`.
pub fn effective_eta_prime(eta_prime: f64, nu: f64, depth_l: usize) -> f64 {
    eta_prime / (1.0 + nu * depth_l as f64)
}

/// Heuristic ascent rate `η·(1 + ln(1 + ν·L))·√(σ_H²/L)`.
pub fn guideline_eta_prime(eta: f64, nu: f64, depth_l: usize, sigma_h_sq: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::argument(format!("eta must be positive, got {eta}")));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::argument(format!("nu must be non-negative, got {nu}")));
    }
    if depth_l == 0 {
        return Err(Error::argument("depth must be at least 1"));
    }
    if !(sigma_h_sq > 0.0 && sigma_h_sq.is_finite()) {
        return Err(Error::argument(format!("Hamiltonian variance must be positive, got {sigma_h_sq}")));
    }
    let l = depth_l as f64;
    Ok(eta * (1.0 + (nu * l).ln_1p()) * (sigma_h_sq / l).sqrt())
}

/// Guideline value together with its ratio `κ = η′/η` and whether `κ`
/// falls in the recommended band `[1.5, 3.0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidelineReport {
    pub eta_prime: f64,
    pub kappa: f64,
    pub in_recommended_band: bool,
}

impl GuidelineReport {
    pub const KAPPA_BAND: (f64, f64) = (1.5, 3.0);

    pub fn compute(eta: f64, nu: f64, depth_l: usize, sigma_h_sq: f64) -> Result<Self> {
        let eta_prime = guideline_eta_prime(eta, nu, depth_l, sigma_h_sq)?;
        let kappa = eta_prime / eta;
        let (lo, hi) = Self::KAPPA_BAND;
        Ok(Self { eta_prime, kappa, in_recommended_band: (lo..=hi).contains(&kappa) })
    }
}

/// One negative-learning-rate step.
///
/// With `g = ∇L(θ)` the tentative point is `θ − η·g`. If its cost does not
/// exceed `L(θ)` it is accepted; otherwise the step is `θ + η′·g`. Both
/// costs are taken on the objective's current mini-batch.
pub fn nlr_step(objective: &mut dyn Objective, theta: &[f64], cfg: &NlrConfig, step: usize) -> Result<(Vec<f64>, StepEvent)> {
    ensure_finite(theta, "theta")?;
    let (loss_before, g) = objective.loss_and_gradient(theta)?;
    ensure_finite(&g, "gradient")?;
    let factor = cfg.schedule.factor(step);
    let tentative = axpy(theta, -cfg.eta * factor, &g);
    let tentative_loss = objective.evaluate(&tentative)?;
    let grad_norm = gradient_norm(&g);

    let (next, kind, loss_after) = if !cfg.reversal_enabled || tentative_loss <= loss_before {
        (tentative, StepKind::DescentAccepted, tentative_loss)
    } else {
        let reversed = axpy(theta, cfg.ascent_rate() * factor, &g);
        let after = objective.evaluate(&reversed)?;
        (reversed, StepKind::Reversal, after)
    };
    let event = StepEvent {
        kind,
        loss_before,
        tentative_loss: Some(tentative_loss),
        loss_after,
        grad_norm,
        displacement: distance(&next, theta),
    };
    Ok((next, event))
}

pub(super) struct Nlr {
    cfg: NlrConfig,
}

impl Nlr {
    pub(super) fn new(cfg: NlrConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl Optimizer for Nlr {
    fn name(&self) -> &'static str {
        "nlr"
    }

    fn step(&mut self, objective: &mut dyn Objective, theta: &mut Vec<f64>, step: usize) -> Result<StepEvent> {
        let (next, event) = nlr_step(objective, theta, &self.cfg, step)?;
        *theta = next;
        Ok(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::baselines::sgd_step;
    use crate::optim::test_objectives::Quadratic;
    use proptest::prelude::*;

    #[test]
    fn accepted_descent_on_quadratic() {
        let cfg = NlrConfig::new(0.1, 0.05).unwrap();
        let (theta, ev) = nlr_step(&mut Quadratic { dim: 1 }, &[1.0], &cfg, 0).unwrap();
        assert!((theta[0] - 0.8).abs() < 1e-15);
        assert_eq!(ev.kind, StepKind::DescentAccepted);
        assert!((ev.loss_after - 0.64).abs() < 1e-15);
        assert_eq!(ev.loss_before, 1.0);
    }

    #[test]
    fn reversal_on_overshoot() {
        // θ − 1.1·2 = −1.2, cost 1.44 > 1, so move to 1 + 0.05·2.
        let cfg = NlrConfig::new(1.1, 0.05).unwrap();
        let (theta, ev) = nlr_step(&mut Quadratic { dim: 1 }, &[1.0], &cfg, 0).unwrap();
        assert!((theta[0] - 1.1).abs() < 1e-15);
        assert_eq!(ev.kind, StepKind::Reversal);
        assert!((ev.tentative_loss.unwrap() - 1.44).abs() < 1e-12);
        assert!((ev.displacement - 0.05 * ev.grad_norm).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = NlrConfig::new(0.3, 0.6).unwrap();
        let (theta, ev) = nlr_step(&mut Quadratic { dim: 3 }, &[0.0; 3], &cfg, 0).unwrap();
        assert_eq!(theta, vec![0.0; 3]);
        assert_eq!(ev.kind, StepKind::DescentAccepted);
        assert_eq!(ev.displacement, 0.0);
    }

    #[test]
    fn guideline_values() {
        assert_eq!(guideline_eta_prime(0.01, 0.0, 5, 5.0).unwrap(), 0.01);
        assert_eq!(guideline_eta_prime(0.37, 0.0, 3, 3.0).unwrap(), 0.37);
        let v = guideline_eta_prime(0.01, 0.05, 5, 5.0).unwrap();
        // 0.01·(1 + ln 1.25)
        assert!((v - 0.012_231_435_513_142_098).abs() < 1e-12, "{v}");
        assert!(guideline_eta_prime(0.0, 0.0, 1, 1.0).is_err());
        assert!(guideline_eta_prime(0.1, -0.1, 1, 1.0).is_err());
        assert!(guideline_eta_prime(0.1, 0.0, 0, 1.0).is_err());
        assert!(guideline_eta_prime(0.1, 0.0, 1, 0.0).is_err());

        let r = GuidelineReport::compute(0.01, 0.05, 5, 5.0).unwrap();
        assert!(!r.in_recommended_band);
        let r = GuidelineReport::compute(0.01, 0.0, 1, 4.0).unwrap();
        assert!((r.kappa - 2.0).abs() < 1e-12 && r.in_recommended_band);
    }

    #[test]
    fn effective_rate() {
        assert_eq!(effective_eta_prime(0.02, 0.0, 5), 0.02);
        assert!((effective_eta_prime(0.02, 0.05, 5) - 0.016).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for nu in [0.0, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let v = effective_eta_prime(0.02, nu, 5);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(NlrConfig::new(0.0, 0.1).is_err());
        assert!(NlrConfig::new(0.1, -0.1).is_err());
        let mut cfg = NlrConfig::new(0.1, 0.2).unwrap();
        cfg.circuit_depth = 0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn disabled_reversal_equals_sgd(
            theta in proptest::collection::vec(-3.0f64..3.0, 1..6),
            eta in 0.001f64..2.0,
        ) {
            let mut cfg = NlrConfig::new(eta, 0.5).unwrap();
            cfg.reversal_enabled = false;
            let (a, _) = nlr_step(&mut Quadratic { dim: theta.len() }, &theta, &cfg, 0).unwrap();
            let (b, _) = sgd_step(&mut Quadratic { dim: theta.len() }, &theta, eta).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn acceptance_logic_and_reversal_length(
            theta in proptest::collection::vec(-3.0f64..3.0, 1..6),
            eta in 0.001f64..2.0,
            eta_prime in 0.001f64..2.0,
        ) {
            let cfg = NlrConfig::new(eta, eta_prime).unwrap();
            let (next, ev) = nlr_step(&mut Quadratic { dim: theta.len() }, &theta, &cfg, 0).unwrap();
            let moved = distance(&next, &theta);
            match ev.kind {
                StepKind::DescentAccepted => prop_assert!(ev.loss_after <= ev.loss_before),
                StepKind::Reversal => {
                    prop_assert!(ev.tentative_loss.unwrap() > ev.loss_before);
                    prop_assert!((moved - eta_prime * ev.grad_norm).abs() <= 1e-12 * (1.0 + moved));
                }
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }
    }
}
