//! Analytic testbeds and the statistics run on them.
//!
//! The plateau surface is a Gaussian well on a gently tilted plane:
//!
//! ```text
//! C(x, y) = −A·exp(−((x−cx)² + (y−cy)²) / (2s²)) + b·(x + y)
//! ```
//!
//! Away from the well `‖∇C‖` is about `b√2`, far below the plateau bound `ε`.
//! [`NoisyObjective`] wraps any analytic objective with isotropic gradient
//! noise and, optionally, noisy cost evaluations.

mod experiments;
mod stats;

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::optim::Objective;
use crate::rng::{rng_from_seed, Rng};

pub use experiments::{
    estimate_diffusion, measure_exit_time, post_escape_convergence, violation_rate_vs_gradient, DiffusionReport,
    ExitTimeReport, PostEscapeReport, StartSampler, ViolationRow, BOOTSTRAP_RESAMPLES, CONFIDENCE_LEVEL,
    DEFAULT_EXIT_CAP, MIN_DIFFUSION_STEPS, MIN_POST_ESCAPE_SEEDS, MIN_VIOLATION_TRIALS,
};
pub use stats::{bootstrap_mean_ci, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauSurface {
    pub cave_center: [f64; 2],
    pub cave_depth: f64,
    pub cave_width: f64,
    pub background_slope: f64,
    /// Gradient bound that defines the flat region.
    pub plateau_eps: f64,
}

impl Default for PlateauSurface {
    fn default() -> Self {
        Self { cave_center: [-2.0, -2.0], cave_depth: 1.0, cave_width: 0.4, background_slope: 1e-4, plateau_eps: 1e-3 }
    }
}

impl PlateauSurface {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(&self.cave_center, "cave center")?;
        for (name, v) in [("cave depth", self.cave_depth), ("cave width", self.cave_width), ("plateau eps", self.plateau_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.background_slope >= 0.0 && self.background_slope.is_finite()) {
            return Err(Error::argument(format!("background slope must be non-negative, got {}", self.background_slope)));
        }
        Ok(())
    }

    fn well(&self, point: [f64; 2]) -> (f64, f64, f64) {
        let dx = point[0] - self.cave_center[0];
        let dy = point[1] - self.cave_center[1];
        let s2 = self.cave_width * self.cave_width;
        let e = (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
        (self.cave_depth * e, dx / s2, dy / s2)
    }

    pub fn cost(&self, point: [f64; 2]) -> f64 {
        let (depth, _, _) = self.well(point);
        -depth + self.background_slope * (point[0] + point[1])
    }

    pub fn gradient(&self, point: [f64; 2]) -> [f64; 2] {
        let (depth, ux, uy) = self.well(point);
        [depth * ux + self.background_slope, depth * uy + self.background_slope]
    }

    pub fn gradient_norm(&self, point: [f64; 2]) -> f64 {
        let [gx, gy] = self.gradient(point);
        gx.hypot(gy)
    }

    pub fn in_plateau(&self, point: [f64; 2]) -> bool {
        self.gradient_norm(point) <= self.plateau_eps
    }

    /// Largest `‖∇C‖` over an `n × n` grid spanning `[lo, hi]²`.
    pub fn max_gradient_norm(&self, lo: [f64; 2], hi: [f64; 2], n: usize) -> f64 {
        grid_points(lo, hi, n).map(|p| self.gradient_norm(p)).fold(0.0, f64::max)
    }

    /// Samples `(x, y, C, ‖∇C‖)` on an `n × n` grid, `x` varying slowest.
    pub fn grid(&self, lo: [f64; 2], hi: [f64; 2], n: usize) -> Result<Vec<GridRow>> {
        if n < 2 {
            return Err(Error::argument("grid needs at least 2 points per axis"));
        }
        ensure_finite(&[lo[0], lo[1], hi[0], hi[1]], "grid bounds")?;
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::argument("grid bounds must satisfy lo < hi"));
        }
        Ok(grid_points(lo, hi, n)
            .map(|p| GridRow { x: p[0], y: p[1], cost: self.cost(p), grad_norm: self.gradient_norm(p) })
            .collect())
    }
}

fn grid_points(lo: [f64; 2], hi: [f64; 2], n: usize) -> impl Iterator<Item = [f64; 2]> {
    let step = move |k: usize, a: f64, b: f64| if n < 2 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 };
    (0..n).flat_map(move |i| (0..n).map(move |j| [step(i, lo[0], hi[0]), step(j, lo[1], hi[1])]))
}

pub fn plateau_cost(point: [f64; 2], surface: &PlateauSurface) -> f64 {
    surface.cost(point)
}

pub fn plateau_gradient(point: [f64; 2], surface: &PlateauSurface) -> [f64; 2] {
    surface.gradient(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub cost: f64,
    pub grad_norm: f64,
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// Exact objective on the plateau surface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlateauObjective {
    pub surface: PlateauSurface,
}

fn as_point(theta: &[f64]) -> Result<[f64; 2]> {
    match theta {
        [x, y] => Ok([*x, *y]),
        _ => Err(Error::Shape { expected: 2, got: theta.len() }),
    }
}

impl Objective for PlateauObjective {
    fn dimension(&self) -> usize {
        2
    }
    fn evaluate(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(self.surface.cost(as_point(theta)?))
    }
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.surface.gradient(as_point(theta)?).to_vec())
    }
}

/// `C(θ) = ½ Σ hᵢ (θᵢ − cᵢ)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBowl {
    pub curvatures: Vec<f64>,
    pub center: Vec<f64>,
}

impl QuadraticBowl {
    pub fn new(curvatures: Vec<f64>) -> Result<Self> {
        if curvatures.is_empty() {
            return Err(Error::argument("quadratic needs at least one dimension"));
        }
        if curvatures.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::argument("curvatures must be finite and non-negative"));
        }
        let center = vec![0.0; curvatures.len()];
        Ok(Self { curvatures, center })
    }

    /// Pure noise test objective: `C ≡ 0`.
    pub fn flat(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dimension(&self) -> usize {
        self.curvatures.len()
    }

    pub fn cost(&self, theta: &[f64]) -> f64 {
        let mut acc = CompensatedSum::default();
        for ((h, t), c) in self.curvatures.iter().zip(theta).zip(&self.center) {
            acc.add(0.5 * h * (t - c) * (t - c));
        }
        acc.total()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.curvatures.iter().zip(theta).zip(&self.center).map(|((h, t), c)| h * (t - c)).collect()
    }

    /// A point whose gradient is `target`. Every curvature must be positive.
    pub fn point_with_gradient(&self, target: &[f64]) -> Result<Vec<f64>> {
        if target.len() != self.dimension() {
            return Err(Error::Shape { expected: self.dimension(), got: target.len() });
        }
        if self.curvatures.iter().any(|h| *h <= 0.0) {
            return Err(Error::argument("prescribing a gradient needs strictly positive curvature"));
        }
        Ok(self.curvatures.iter().zip(target).zip(&self.center).map(|((h, g), c)| c + g / h).collect())
    }
}

impl Objective for QuadraticBowl {
    fn dimension(&self) -> usize {
        self.curvatures.len()
    }
    fn evaluate(&mut self, theta: &[f64]) -> Result<f64> {
        check_len(self.curvatures.len(), theta)?;
        Ok(self.cost(theta))
    }
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.curvatures.len(), theta)?;
        Ok(QuadraticBowl::gradient(self, theta))
    }
}

fn check_len(expected: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != expected {
        return Err(Error::Shape { expected, got: theta.len() });
    }
    Ok(())
}

/// An analytic objective observed through noise.
///
/// Each gradient gets `ξ ~ N(0, (σ²/dim)·I)`, so `E‖ξ‖² = σ²`. Each cost
/// evaluation gets independent `N(0, σ_c²)` noise when `cost_sigma > 0`,
/// mimicking finite-shot estimates. `full_loss` reports the exact cost.
#[derive(Debug, Clone)]
pub struct NoisyObjective<O> {
    base: O,
    gradient_sigma: f64,
    cost_sigma: f64,
    seed: u64,
    rng: Rng,
}

impl<O: Objective> NoisyObjective<O> {
    pub fn new(base: O, gradient_sigma: f64, seed: u64) -> Result<Self> {
        non_negative("gradient noise", gradient_sigma)?;
        Ok(Self { base, gradient_sigma, cost_sigma: 0.0, seed, rng: rng_from_seed(seed) })
    }

    pub fn with_cost_noise(mut self, cost_sigma: f64) -> Result<Self> {
        non_negative("cost noise", cost_sigma)?;
        self.cost_sigma = cost_sigma;
        Ok(self)
    }

    pub fn gradient_sigma(&self) -> f64 {
        self.gradient_sigma
    }

    pub fn cost_sigma(&self) -> f64 {
        self.cost_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn base(&self) -> &O {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut O {
        &mut self.base
    }

    /// Same objective restarted on a different noise stream.
    pub fn reseeded(&self, seed: u64) -> Self
    where
        O: Clone,
    {
        Self { base: self.base.clone(), seed, rng: rng_from_seed(seed), ..*self }
    }

    fn cost_noise(&mut self) -> f64 {
        if self.cost_sigma > 0.0 {
            self.cost_sigma * self.rng.sample::<f64, _>(rand_distr::StandardNormal)
        } else {
            0.0
        }
    }

    fn add_gradient_noise(&mut self, grad: &mut [f64]) {
        if self.gradient_sigma == 0.0 || grad.is_empty() {
            return;
        }
        let std = self.gradient_sigma / (grad.len() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite positive std");
        for g in grad.iter_mut() {
            *g += normal.sample(&mut self.rng);
        }
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::argument(format!("{name} must be non-negative, got {v}")))
    }
}

impl<O: Objective> Objective for NoisyObjective<O> {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }
    fn resample(&mut self) -> Result<()> {
        self.base.resample()
    }
    fn evaluate(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(self.base.evaluate(theta)? + self.cost_noise())
    }
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.base.gradient(theta)?;
        self.add_gradient_noise(&mut g);
        Ok(g)
    }
    fn loss_and_gradient(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (loss, mut g) = self.base.loss_and_gradient(theta)?;
        self.add_gradient_noise(&mut g);
        Ok((loss + self.cost_noise(), g))
    }
    fn full_loss(&mut self, theta: &[f64]) -> Option<Result<f64>> {
        Some(self.base.evaluate(theta))
    }
}
