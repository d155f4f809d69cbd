use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{bootstrap_mean_ci, mean, CompensatedSum};
use super::{NoisyObjective, PlateauSurface, QuadraticBowl};
use crate::error::{ensure_finite, Error, Result};
use crate::optim::{NlrConfig, Objective, OptimizerConfig};
use crate::rng::{derive_seed, derived_rng, Rng};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const CONFIDENCE_LEVEL: f64 = 0.95;
pub const MIN_DIFFUSION_STEPS: usize = 100;
pub const MIN_VIOLATION_TRIALS: usize = 10_000;
pub const MIN_POST_ESCAPE_SEEDS: usize = 50;
pub const DEFAULT_EXIT_CAP: usize = 100_000;

/// Where trajectories begin.
#[derive(Debug, Clone, PartialEq)]
pub enum StartSampler {
    Fixed(Vec<f64>),
    /// Uniform over `[lo, hi]²`, rejecting points outside the flat region.
    PlateauBox { surface: PlateauSurface, lo: [f64; 2], hi: [f64; 2] },
}

impl StartSampler {
    const MAX_REJECTIONS: usize = 10_000;

    pub fn draw(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        match self {
            StartSampler::Fixed(p) => Ok(p.clone()),
            StartSampler::PlateauBox { surface, lo, hi } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return Err(Error::argument("start box must satisfy lo < hi"));
                }
                for _ in 0..Self::MAX_REJECTIONS {
                    let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
                    if surface.in_plateau(p) {
                        return Ok(p.to_vec());
                    }
                }
                Err(Error::argument("start box contains no plateau points"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub optimizer: String,
    /// `mean ‖Δθ‖² / (2·dim)` over every recorded step.
    pub d_hat: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    pub confidence_halfwidth: f64,
    /// Fraction of steps whose tentative descent failed.
    pub p_hat: f64,
    /// Mean `‖Δθ‖/‖g‖` over violation steps.
    pub mean_violation_step: Option<f64>,
    pub trajectories: usize,
    pub steps_per_trajectory: usize,
}

impl DiffusionReport {
    /// Confidence intervals do not overlap and this estimate is larger.
    pub fn exceeds(&self, other: &DiffusionReport) -> bool {
        self.d_lower > other.d_upper
    }
}

struct TrajectoryStats {
    sq_displacement: Vec<f64>,
    violations: usize,
    violation_steps: Vec<f64>,
}

fn run_trajectory<O: Objective + Clone>(
    optimizer: &OptimizerConfig,
    objective: &NoisyObjective<O>,
    starts: &StartSampler,
    steps: usize,
    seed: u64,
    k: u64,
) -> Result<TrajectoryStats> {
    let mut obj = objective.reseeded(derive_seed(seed, &[1, k]));
    let mut opt = optimizer.reseeded(derive_seed(seed, &[2, k])).build()?;
    let mut theta = starts.draw(&mut derived_rng(seed, &[3, k]))?;
    if theta.len() != obj.dimension() {
        return Err(Error::Shape { expected: obj.dimension(), got: theta.len() });
    }
    let mut stats = TrajectoryStats { sq_displacement: Vec::with_capacity(steps), violations: 0, violation_steps: Vec::new() };
    for t in 0..steps {
        obj.resample()?;
        let ev = opt.step(&mut obj, &mut theta, t)?;
        stats.sq_displacement.push(ev.displacement * ev.displacement);
        if ev.kind.is_violation() {
            stats.violations += 1;
            if ev.grad_norm > 0.0 {
                stats.violation_steps.push(ev.displacement / ev.grad_norm);
            }
        }
    }
    Ok(stats)
}

/// Estimates the per-dimension diffusion coefficient of an optimizer from
/// independent trajectories. The confidence interval bootstraps over
/// trajectories (over steps when there is only one).
pub fn estimate_diffusion<O>(
    optimizer: &OptimizerConfig,
    objective: &NoisyObjective<O>,
    starts: &StartSampler,
    trajectories: usize,
    steps: usize,
    seed: u64,
) -> Result<DiffusionReport>
where
    O: Objective + Clone + Send + Sync,
{
    if trajectories.saturating_mul(steps) < MIN_DIFFUSION_STEPS {
        return Err(Error::Statistics(format!(
            "{trajectories} x {steps} steps is below the {MIN_DIFFUSION_STEPS} needed for a confidence interval"
        )));
    }
    let runs: Vec<TrajectoryStats> = (0..trajectories as u64)
        .into_par_iter()
        .map(|k| run_trajectory(optimizer, objective, starts, steps, seed, k))
        .collect::<Result<_>>()?;
    let norm = 2.0 * objective.dimension() as f64;
    let total = (trajectories * steps) as f64;
    let d_hat = runs.iter().flat_map(|r| r.sq_displacement.iter().copied()).collect::<CompensatedSum>().total() / total / norm;
    let units: Vec<f64> = if trajectories >= 2 {
        runs.iter().map(|r| mean(&r.sq_displacement) / norm).collect()
    } else {
        runs[0].sq_displacement.iter().map(|v| v / norm).collect()
    };
    let (_, d_lower, d_upper) = bootstrap_mean_ci(&units, BOOTSTRAP_RESAMPLES, CONFIDENCE_LEVEL, derive_seed(seed, &[4]))?;
    let violations: usize = runs.iter().map(|r| r.violations).sum();
    let violation_steps: Vec<f64> = runs.iter().flat_map(|r| r.violation_steps.iter().copied()).collect();
    Ok(DiffusionReport {
        optimizer: optimizer.name().to_string(),
        d_hat,
        d_lower,
        d_upper,
        confidence_halfwidth: 0.5 * (d_upper - d_lower),
        p_hat: violations as f64 / total,
        mean_violation_step: (!violation_steps.is_empty()).then(|| mean(&violation_steps)),
        trajectories,
        steps_per_trajectory: steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeReport {
    pub optimizer: String,
    pub radius: f64,
    pub max_steps: usize,
    /// First step with `‖θ_t − θ_0‖ ≥ R`; `None` when censored.
    pub times: Vec<Option<usize>>,
    /// Over uncensored trials.
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub censored_fraction: f64,
    /// Every trial hit the cap.
    pub inconclusive: bool,
}

/// First-passage time out of the ball of radius `radius` around `start`.
pub fn measure_exit_time<O>(
    optimizer: &OptimizerConfig,
    objective: &NoisyObjective<O>,
    start: &[f64],
    radius: f64,
    trials: usize,
    max_steps: usize,
    seed: u64,
) -> Result<ExitTimeReport>
where
    O: Objective + Clone + Send + Sync,
{
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::argument(format!("radius must be positive, got {radius}")));
    }
    if trials == 0 || max_steps == 0 {
        return Err(Error::argument("exit-time runs need trials > 0 and max_steps > 0"));
    }
    ensure_finite(start, "start")?;
    if start.len() != objective.dimension() {
        return Err(Error::Shape { expected: objective.dimension(), got: start.len() });
    }
    let times: Vec<Option<usize>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| -> Result<Option<usize>> {
            let mut obj = objective.reseeded(derive_seed(seed, &[1, k]));
            let mut opt = optimizer.reseeded(derive_seed(seed, &[2, k])).build()?;
            let mut theta = start.to_vec();
            let r2 = radius * radius;
            for t in 0..max_steps {
                obj.resample()?;
                opt.step(&mut obj, &mut theta, t)?;
                let d2: f64 = theta.iter().zip(start).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 >= r2 {
                    return Ok(Some(t + 1));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let mut exits: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
    exits.sort_by(f64::total_cmp);
    let median = match exits.len() {
        0 => None,
        n if n % 2 == 1 => Some(exits[n / 2]),
        n => Some(0.5 * (exits[n / 2 - 1] + exits[n / 2])),
    };
    Ok(ExitTimeReport {
        optimizer: optimizer.name().to_string(),
        radius,
        max_steps,
        mean: (!exits.is_empty()).then(|| mean(&exits)),
        median,
        censored_fraction: (trials - exits.len()) as f64 / trials as f64,
        inconclusive: exits.is_empty(),
        times,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    /// Exact `‖∇C‖` at the test point.
    pub grad_norm: f64,
    pub p_hat: f64,
    /// 95% normal-approximation halfwidth.
    pub halfwidth: f64,
    pub trials: usize,
}

/// Single-step violation frequency at points whose exact gradient has each
/// of the given norms, pointing along the all-ones direction. Each trial
/// restarts the optimizer at the same point with fresh noise.
pub fn violation_rate_vs_gradient(
    optimizer: &OptimizerConfig,
    objective: &NoisyObjective<QuadraticBowl>,
    grad_norms: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ViolationRow>> {
    if trials < MIN_VIOLATION_TRIALS {
        return Err(Error::Statistics(format!("violation rates need at least {MIN_VIOLATION_TRIALS} trials, got {trials}")));
    }
    ensure_finite(grad_norms, "gradient norms")?;
    let dim = objective.dimension();
    let unit = 1.0 / (dim as f64).sqrt();
    grad_norms
        .par_iter()
        .enumerate()
        .map(|(i, &norm)| {
            let point = objective.base().point_with_gradient(&vec![norm * unit; dim])?;
            let mut obj = objective.reseeded(derive_seed(seed, &[1, i as u64]));
            let mut violations = 0usize;
            for k in 0..trials {
                let mut opt = optimizer.reseeded(derive_seed(seed, &[2, i as u64, k as u64])).build()?;
                let mut theta = point.clone();
                obj.resample()?;
                if opt.step(&mut obj, &mut theta, 0)?.kind.is_violation() {
                    violations += 1;
                }
            }
            let p = violations as f64 / trials as f64;
            Ok(ViolationRow {
                grad_norm: norm,
                p_hat: p,
                halfwidth: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
                trials,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEscapeReport {
    pub seeds: usize,
    pub steps: usize,
    /// Mean `‖∇C(θ_T)‖²` across seeds.
    pub final_grad_sq: f64,
    /// Mean `‖∇C‖²` over the last tenth of each run, averaged across seeds.
    pub tail_grad_sq: f64,
    pub tail_halfwidth: f64,
    /// `tail_grad_sq / (η·σ²)`; `None` without noise.
    pub floor_ratio: Option<f64>,
}

/// Runs NLR from `start` on a noisy quadratic and measures the squared
/// gradient norm it settles at.
pub fn post_escape_convergence(
    cfg: &NlrConfig,
    objective: &NoisyObjective<QuadraticBowl>,
    start: &[f64],
    steps: usize,
    seeds: usize,
    seed: u64,
) -> Result<PostEscapeReport> {
    cfg.validate()?;
    if seeds < MIN_POST_ESCAPE_SEEDS {
        return Err(Error::Statistics(format!("post-escape runs need at least {MIN_POST_ESCAPE_SEEDS} seeds, got {seeds}")));
    }
    if steps == 0 {
        return Err(Error::argument("post-escape runs need at least one step"));
    }
    ensure_finite(start, "start")?;
    if start.len() != objective.dimension() {
        return Err(Error::Shape { expected: objective.dimension(), got: start.len() });
    }
    let tail = steps.div_ceil(10);
    let per_seed: Vec<(f64, f64)> = (0..seeds as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let mut obj = objective.reseeded(derive_seed(seed, &[1, k]));
            let mut opt = OptimizerConfig::Nlr(cfg.clone()).build()?;
            let mut theta = start.to_vec();
            let mut tail_sum = CompensatedSum::default();
            let mut last = 0.0;
            for t in 0..steps {
                obj.resample()?;
                opt.step(&mut obj, &mut theta, t)?;
                last = obj.base().gradient(&theta).iter().map(|g| g * g).sum();
                if t + tail >= steps {
                    tail_sum.add(last);
                }
            }
            Ok((last, tail_sum.total() / tail as f64))
        })
        .collect::<Result<_>>()?;
    let finals: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
    let tails: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
    let tail_mean = mean(&tails);
    let var = tails.iter().map(|v| (v - tail_mean) * (v - tail_mean)).sum::<f64>() / (seeds - 1) as f64;
    let sigma = objective.gradient_sigma();
    Ok(PostEscapeReport {
        seeds,
        steps,
        final_grad_sq: mean(&finals),
        tail_grad_sq: tail_mean,
        tail_halfwidth: 1.96 * (var / seeds as f64).sqrt(),
        floor_ratio: (sigma > 0.0).then(|| tail_mean / (cfg.eta * sigma * sigma)),
    })
}
