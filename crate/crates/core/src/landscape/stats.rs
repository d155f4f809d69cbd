use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().total() / values.len() as f64
}

/// Percentile bootstrap of the mean: `(mean, lower, upper)` at `level`.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Statistics(format!("bootstrap needs at least 2 values, got {}", values.len())));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::argument("bootstrap needs resamples > 0 and a level in (0, 1)"));
    }
    let mut rng = rng_from_seed(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).collect::<CompensatedSum>().total() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok((mean(values), at(tail), at(1.0 - tail)))
}
