//! Plateau-surface experiments behind `nlrq landscape …`.

use std::fs;
use std::path::Path;

use nlr_core::landscape::{
    estimate_diffusion, measure_exit_time, post_escape_convergence, violation_rate_vs_gradient, write_grid_csv,
    DiffusionReport, ExitTimeReport, NoisyObjective, PlateauObjective, PlateauSurface, PostEscapeReport, QuadraticBowl,
    StartSampler, ViolationRow, DEFAULT_EXIT_CAP,
};
use nlr_core::rng::derive_seed;
use nlr_core::optim::{ArmijoConfig, NlrConfig, OptimizerConfig, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::report::write_json;

/// Shared knobs. Gradient noise is isotropic with `E‖ξ‖² = σ²`; cost
/// evaluations carry independent `N(0, σ_c²)` noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSettings {
    pub surface: PlateauSurface,
    pub eta: f64,
    pub eta_prime: f64,
    pub gradient_sigma: f64,
    pub cost_sigma: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Start region `[lo, hi]²`, inside the flat part of the surface.
    pub start_lo: [f64; 2],
    pub start_hi: [f64; 2],
    /// Fixed start for exit-time runs.
    pub exit_start: [f64; 2],
    pub seed: u64,
}

impl Default for LandscapeSettings {
    fn default() -> Self {
        Self {
            surface: PlateauSurface::default(),
            eta: 0.01,
            eta_prime: 0.02,
            gradient_sigma: 1.0,
            cost_sigma: 1e-3,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            start_lo: [1.0, 1.0],
            start_hi: [3.0, 3.0],
            exit_start: [2.0, 2.0],
            seed: 0,
        }
    }
}

impl LandscapeSettings {
    pub fn optimizer(&self, name: &str) -> Result<OptimizerConfig> {
        Ok(match name {
            "nlr" => OptimizerConfig::Nlr(NlrConfig::new(self.eta, self.eta_prime)?),
            "backtrack" => OptimizerConfig::Backtrack(ArmijoConfig { eta_init: self.eta, c: self.armijo_c, shrink: self.armijo_shrink }),
            "sgd" => OptimizerConfig::Sgd { eta: self.eta },
            other => return Err(HarnessError::config(format!("landscape runs support nlr, backtrack and sgd, not {other:?}"))),
        })
    }

    pub fn plateau_objective(&self) -> Result<NoisyObjective<PlateauObjective>> {
        self.surface.validate()?;
        Ok(NoisyObjective::new(PlateauObjective { surface: self.surface }, self.gradient_sigma, self.seed)?
            .with_cost_noise(self.cost_sigma)?)
    }

    pub fn starts(&self) -> StartSampler {
        StartSampler::PlateauBox { surface: self.surface, lo: self.start_lo, hi: self.start_hi }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn run_grid(settings: &LandscapeSettings, lo: f64, hi: f64, points: usize, out: &Path) -> Result<()> {
    let rows = settings.surface.grid([lo, lo], [hi, hi], points)?;
    ensure_dir(out)?;
    write_grid_csv(&out.join("grid.csv"), &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionComparison {
    pub settings: LandscapeSettings,
    pub reports: Vec<DiffusionReport>,
    /// Each report's interval lies strictly above the next one's.
    pub ordered: bool,
}

pub fn run_diffusion(settings: &LandscapeSettings, optimizers: &[String], trajectories: usize, steps: usize) -> Result<DiffusionComparison> {
    let objective = settings.plateau_objective()?;
    let reports = optimizers
        .iter()
        .map(|name| Ok(estimate_diffusion(&settings.optimizer(name)?, &objective, &settings.starts(), trajectories, steps, settings.seed)?))
        .collect::<Result<Vec<_>>>()?;
    let ordered = reports.windows(2).all(|w| w[0].exceeds(&w[1]));
    Ok(DiffusionComparison { settings: settings.clone(), reports, ordered })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeRow {
    pub report: ExitTimeReport,
    /// `R² / (2·D̂)`.
    pub predicted: f64,
    /// `mean / predicted`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeStudy {
    pub settings: LandscapeSettings,
    pub diffusion: DiffusionReport,
    pub rows: Vec<ExitTimeRow>,
    /// Mean exit time strictly increases with the radius.
    pub monotone: bool,
}

/// Estimates `D̂` for the optimizer, then measures exit times for each radius.
pub fn run_exit_time(
    settings: &LandscapeSettings,
    optimizer: &str,
    radii: &[f64],
    trials: usize,
    max_steps: Option<usize>,
    diffusion_trajectories: usize,
    diffusion_steps: usize,
) -> Result<ExitTimeStudy> {
    let opt = settings.optimizer(optimizer)?;
    let objective = settings.plateau_objective()?;
    let start = StartSampler::Fixed(settings.exit_start.to_vec());
    let diffusion = estimate_diffusion(&opt, &objective, &start, diffusion_trajectories, diffusion_steps, settings.seed)?;
    let rows = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let report = measure_exit_time(
                &opt,
                &objective,
                &settings.exit_start,
                r,
                trials,
                max_steps.unwrap_or(DEFAULT_EXIT_CAP),
                settings.seed.wrapping_add(1 + i as u64),
            )?;
            let predicted = r * r / (2.0 * diffusion.d_hat);
            Ok(ExitTimeRow { ratio: report.mean.map(|m| m / predicted), report, predicted })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| match (w[0].report.mean, w[1].report.mean) {
        (Some(a), Some(b)) => w[1].report.radius > w[0].report.radius && b > a,
        _ => false,
    });
    Ok(ExitTimeStudy { settings: settings.clone(), diffusion, rows, monotone })
}

/// Noisy strongly convex quadratic used by the violation and post-escape runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSettings {
    pub curvatures: Vec<f64>,
    pub sigma: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub seed: u64,
}

impl Default for QuadraticSettings {
    fn default() -> Self {
        Self {
            curvatures: (0..10).map(|i| 0.5 + 1.5 * i as f64 / 9.0).collect(),
            sigma: 1.0,
            eta: 0.01,
            eta_prime: 0.02,
            seed: 0,
        }
    }
}

impl QuadraticSettings {
    fn objective(&self, sigma: f64) -> Result<NoisyObjective<QuadraticBowl>> {
        Ok(NoisyObjective::new(QuadraticBowl::new(self.curvatures.clone())?, sigma, self.seed)?)
    }

    fn nlr(&self) -> Result<NlrConfig> {
        Ok(NlrConfig::new(self.eta, self.eta_prime)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationStudy {
    pub settings: QuadraticSettings,
    /// Gradient norms as multiples of `σ`.
    pub scales: Vec<f64>,
    pub rows: Vec<ViolationRow>,
}

pub fn run_violation(settings: &QuadraticSettings, scales: &[f64], trials: usize) -> Result<ViolationStudy> {
    let norms: Vec<f64> = scales.iter().map(|s| s * settings.sigma).collect();
    let rows = violation_rate_vs_gradient(
        &OptimizerConfig::Nlr(settings.nlr()?),
        &settings.objective(settings.sigma)?,
        &norms,
        trials,
        settings.seed,
    )?;
    Ok(ViolationStudy { settings: settings.clone(), scales: scales.to_vec(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEscapeStudy {
    pub settings: QuadraticSettings,
    /// One entry per noise variance, fixed rate.
    pub variances: Vec<f64>,
    pub fixed: Vec<PostEscapeReport>,
    /// Same runs under `η_t = η·t0/(t0 + t)` at the first variance.
    pub decaying: Option<PostEscapeReport>,
    pub decay_t0: Option<f64>,
}

pub fn run_post_escape(
    settings: &QuadraticSettings,
    variances: &[f64],
    steps: usize,
    seeds: usize,
    decay_t0: Option<f64>,
) -> Result<PostEscapeStudy> {
    if variances.is_empty() || variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(HarnessError::config("variances must be a non-empty list of non-negative numbers"));
    }
    let start = vec![1.0; settings.curvatures.len()];
    let cfg = settings.nlr()?;
    // Independent noise per variance; a shared stream would make the floors
    // scale by exactly the variance ratio.
    let fixed = variances
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let seed = derive_seed(settings.seed, &[i as u64]);
            let objective = settings.objective(v.sqrt())?.reseeded(seed);
            Ok(post_escape_convergence(&cfg, &objective, &start, steps, seeds, seed)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let decaying = match decay_t0 {
        Some(t0) => {
            let mut annealed = cfg.clone();
            annealed.schedule = Schedule::InverseTime { t0 };
            let obj = settings.objective(variances[0].sqrt())?;
            Some(post_escape_convergence(&annealed, &obj, &start, steps, seeds, settings.seed)?)
        }
        None => None,
    };
    Ok(PostEscapeStudy { settings: settings.clone(), variances: variances.to_vec(), fixed, decaying, decay_t0 })
}

pub fn write_study<T: Serialize>(out: &Path, name: &str, study: &T) -> Result<()> {
    ensure_dir(out)?;
    write_json(&out.join(format!("{name}.json")), study)
}
