//! Run configuration: defaults, a flat `key = value` file format and
//! per-key overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nlr_core::ansatz::CircuitSpec;
use nlr_core::optim::{ArmijoConfig, NlrConfig, NoiseKind, OptimizerConfig, PerturbationConfig, PlateauDetector, SigmaPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const OPTIMIZER_NAMES: [&str; 9] =
    ["sgd", "momentum", "rmsprop", "adam", "nlr", "backtrack", "perturb_gauss", "perturb_uniform", "reinit"];

/// Everything that determines a training run. `out` only says where files
/// go and is not part of the echoed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// External dataset; synthetic data is generated when absent.
    pub data_csv: Option<PathBuf>,
    pub dimension: usize,
    pub samples: usize,
    pub separation: f64,
    pub train_fraction: f64,
    pub qubits: usize,
    pub layers: usize,
    pub optimizer: String,
    pub eta: f64,
    pub eta_prime: f64,
    pub nu: f64,
    pub momentum: f64,
    pub rms_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub eps: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub perturb_warmup: usize,
    pub reinit_window: usize,
    pub reinit_threshold: f64,
    pub batch: usize,
    pub steps: usize,
    /// Shots per expectation; 0 means exact expectations.
    pub shots: u64,
    /// Per-component standard deviation of additive gradient noise.
    pub noise_sigma: f64,
    pub log_every: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_csv: None,
            dimension: 8,
            samples: 1000,
            separation: 2.0,
            train_fraction: 0.8,
            qubits: 6,
            layers: 5,
            optimizer: "nlr".into(),
            eta: 0.01,
            eta_prime: 0.02,
            nu: 0.0,
            momentum: 0.9,
            rms_decay: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            eps: 1e-8,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            perturb_warmup: 100,
            reinit_window: 20,
            reinit_threshold: 1e-3,
            batch: 32,
            steps: 500,
            shots: 1000,
            noise_sigma: 0.0,
            log_every: 50,
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::config(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 28] = [
        "data_csv",
        "dimension",
        "samples",
        "separation",
        "train_fraction",
        "qubits",
        "layers",
        "optimizer",
        "eta",
        "eta_prime",
        "nu",
        "momentum",
        "rms_decay",
        "adam_beta1",
        "adam_beta2",
        "eps",
        "armijo_c",
        "armijo_shrink",
        "perturb_warmup",
        "reinit_window",
        "reinit_threshold",
        "batch",
        "steps",
        "shots",
        "noise_sigma",
        "log_every",
        "seed",
        "out",
    ];

    /// Sets one field from its textual form. A few aliases are accepted:
    /// `epochs` for `steps`, `train_size` for `samples`, `d` for `dimension`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match canonical_key(key) {
            "data_csv" => self.data_csv = (!value.is_empty()).then(|| PathBuf::from(value)),
            "dimension" => self.dimension = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "separation" => self.separation = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "qubits" => self.qubits = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "optimizer" => self.optimizer = value.to_string(),
            "eta" => self.eta = parse(key, value)?,
            "eta_prime" => self.eta_prime = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "rms_decay" => self.rms_decay = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "armijo_c" => self.armijo_c = parse(key, value)?,
            "armijo_shrink" => self.armijo_shrink = parse(key, value)?,
            "perturb_warmup" => self.perturb_warmup = parse(key, value)?,
            "reinit_window" => self.reinit_window = parse(key, value)?,
            "reinit_threshold" => self.reinit_threshold = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "shots" => self.shots = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "log_every" => self.log_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(HarnessError::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Textual value of a key, in the form [`ExperimentConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match canonical_key(key) {
            "data_csv" => self.data_csv.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "dimension" => self.dimension.to_string(),
            "samples" => self.samples.to_string(),
            "separation" => self.separation.to_string(),
            "train_fraction" => self.train_fraction.to_string(),
            "qubits" => self.qubits.to_string(),
            "layers" => self.layers.to_string(),
            "optimizer" => self.optimizer.clone(),
            "eta" => self.eta.to_string(),
            "eta_prime" => self.eta_prime.to_string(),
            "nu" => self.nu.to_string(),
            "momentum" => self.momentum.to_string(),
            "rms_decay" => self.rms_decay.to_string(),
            "adam_beta1" => self.adam_beta1.to_string(),
            "adam_beta2" => self.adam_beta2.to_string(),
            "eps" => self.eps.to_string(),
            "armijo_c" => self.armijo_c.to_string(),
            "armijo_shrink" => self.armijo_shrink.to_string(),
            "perturb_warmup" => self.perturb_warmup.to_string(),
            "reinit_window" => self.reinit_window.to_string(),
            "reinit_threshold" => self.reinit_threshold.to_string(),
            "batch" => self.batch.to_string(),
            "steps" => self.steps.to_string(),
            "shots" => self.shots.to_string(),
            "noise_sigma" => self.noise_sigma.to_string(),
            "log_every" => self.log_every.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => return Err(HarnessError::config(format!("unknown config key {key:?}"))),
        })
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = canonical_key(key.trim());
            if seen.contains(&key) {
                return Err(HarnessError::config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            seen.push(key);
            cfg.set(key, value).map_err(|e| match e {
                HarnessError::Config(msg) => HarnessError::config(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Every key except `out`, in file order.
    pub fn to_file_string(&self) -> String {
        Self::KEYS
            .iter()
            .filter(|k| **k != "out")
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::config(msg));
        CircuitSpec::new(self.qubits, self.layers).map_err(|e| HarnessError::config(e.to_string()))?;
        if self.data_csv.is_none() {
            if self.dimension < 2 || self.dimension > 1 << self.qubits {
                return bad(format!("dimension {} must lie in 2..={} for {} qubits", self.dimension, 1usize << self.qubits, self.qubits));
            }
            if self.samples < 4 {
                return bad(format!("samples must be at least 4, got {}", self.samples));
            }
            if !(self.separation >= 0.0 && self.separation.is_finite()) {
                return bad(format!("separation must be non-negative, got {}", self.separation));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.batch == 0 || self.steps == 0 || self.log_every == 0 {
            return bad("batch, steps and log_every must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        let opt = self.optimizer_config(0)?;
        opt.build().map_err(|e| HarnessError::config(e.to_string()))?;
        Ok(())
    }

    /// The optimizer this configuration names; `seed` feeds optimizers that
    /// draw random numbers.
    pub fn optimizer_config(&self, seed: u64) -> Result<OptimizerConfig> {
        let perturb = |noise| {
            OptimizerConfig::Perturb(PerturbationConfig {
                eta: self.eta,
                noise,
                sigma: SigmaPolicy::Matched { eta_prime: self.eta_prime, warmup: self.perturb_warmup },
                seed,
            })
        };
        Ok(match self.optimizer.as_str() {
            "sgd" => OptimizerConfig::Sgd { eta: self.eta },
            "momentum" => OptimizerConfig::Momentum { eta: self.eta, beta: self.momentum },
            "rmsprop" => OptimizerConfig::Rmsprop { eta: self.eta, decay: self.rms_decay, eps: self.eps },
            "adam" => OptimizerConfig::Adam { eta: self.eta, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.eps },
            "nlr" => {
                let mut cfg = NlrConfig::new(self.eta, self.eta_prime).map_err(|e| HarnessError::config(e.to_string()))?;
                cfg.noise_rate_nu = self.nu;
                cfg.circuit_depth = self.layers;
                OptimizerConfig::Nlr(cfg)
            }
            "backtrack" => OptimizerConfig::Backtrack(ArmijoConfig { eta_init: self.eta, c: self.armijo_c, shrink: self.armijo_shrink }),
            "perturb_gauss" => perturb(NoiseKind::Gaussian),
            "perturb_uniform" => perturb(NoiseKind::Uniform),
            "reinit" => OptimizerConfig::Reinit {
                eta: self.eta,
                detector: PlateauDetector { window: self.reinit_window, threshold: self.reinit_threshold },
                seed,
            },
            other => {
                return Err(HarnessError::config(format!(
                    "unknown optimizer {other:?}; expected one of {}",
                    OPTIMIZER_NAMES.join(", ")
                )))
            }
        })
    }
}

fn canonical_key(key: &str) -> &str {
    match key {
        "epochs" => "steps",
        "train_size" => "samples",
        "d" => "dimension",
        "opt" => "optimizer",
        other => other,
    }
}
