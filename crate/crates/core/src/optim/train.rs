use serde::{Deserialize, Serialize};

use super::{Objective, Optimizer, StepEvent, StepKind};
use crate::ansatz::ParameterVector;
use crate::error::{ensure_finite, Error, Result};

/// Per-step record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub events: Vec<StepEvent>,
    /// Mini-batch loss at `θ_t`, before the step.
    pub losses: Vec<f64>,
    /// `‖g_t‖` of the step's gradient.
    pub grad_norms: Vec<f64>,
    /// Full training loss at `θ_{t+1}` on logged steps.
    pub full_losses: Vec<Option<f64>>,
    pub final_parameters: ParameterVector,
    pub reversal_count: usize,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn violation_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_violation()).count()
    }

    pub fn final_full_loss(&self) -> Option<f64> {
        self.full_losses.last().copied().flatten()
    }
}

/// Runs `steps` optimizer steps from `theta0`.
///
/// Each step: the objective draws a fresh mini-batch, the optimizer
/// computes loss and gradient on it and updates `θ`. When the objective has
/// a full-data loss it is logged every `log_every` steps and always after
/// the last step.
pub fn train(
    objective: &mut dyn Objective,
    optimizer: &mut dyn Optimizer,
    theta0: &[f64],
    steps: usize,
    log_every: usize,
) -> Result<TrainTrace> {
    if steps == 0 {
        return Err(Error::argument("training needs at least one step"));
    }
    if theta0.len() != objective.dimension() {
        return Err(Error::Shape { expected: objective.dimension(), got: theta0.len() });
    }
    ensure_finite(theta0, "theta0")?;
    let log_every = log_every.max(1);
    let mut theta = theta0.to_vec();
    let mut trace = TrainTrace {
        events: Vec::with_capacity(steps),
        losses: Vec::with_capacity(steps),
        grad_norms: Vec::with_capacity(steps),
        full_losses: Vec::with_capacity(steps),
        final_parameters: ParameterVector::zeros(0),
        reversal_count: 0,
    };
    for t in 0..steps {
        objective.resample()?;
        let event = optimizer.step(objective, &mut theta, t)?;
        let logged = (t + 1) % log_every == 0 || t + 1 == steps;
        let full = if logged { objective.full_loss(&theta).transpose()? } else { None };
        trace.losses.push(event.loss_before);
        trace.grad_norms.push(event.grad_norm);
        trace.full_losses.push(full);
        if event.kind == StepKind::Reversal {
            trace.reversal_count += 1;
        }
        trace.events.push(event);
    }
    trace.final_parameters = ParameterVector::new(theta)?;
    Ok(trace)
}
