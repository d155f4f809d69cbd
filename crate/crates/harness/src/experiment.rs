use std::path::Path;
use std::time::{Duration, Instant};

use nlr_core::ansatz::{accuracy, CircuitSpec, ParameterVector};
use nlr_core::datagen::{load_csv_dataset, split_train_test, synthetic_gaussian_dataset, Dataset};
use nlr_core::optim::{train, CircuitObjective};
use nlr_core::qsim::ShotConfig;
use nlr_core::rng::{derive_seed, derived_rng};
use rand::Rng as _;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{
    emit_report, summarize_trace, trace_rows, write_aggregate, write_comparison, Aggregate, AggregateRow, Comparison,
    ComparisonRow, ExperimentReport, MeanStd, TraceRow, AGGREGATE_SCHEMA, COMPARISON_SCHEMA, REPORT_SCHEMA, TRACE_FILE,
};

const DATA_TAG: u64 = 1;
const SPLIT_TAG: u64 = 2;
const INIT_TAG: u64 = 3;
const BATCH_TAG: u64 = 4;
const SHOT_TAG: u64 = 5;
const OPTIMIZER_TAG: u64 = 6;

/// Parameters a sweep may vary (aliases from [`ExperimentConfig::set`] also work).
pub const SWEEP_PARAMETERS: [&str; 7] = ["eta_prime", "steps", "dimension", "layers", "noise_sigma", "samples", "optimizer"];

pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub trace: Vec<TraceRow>,
    /// Not persisted, so output files stay reproducible.
    pub wall_time: Duration,
}

/// Data set named by the configuration. Synthetic data depends only on the
/// seed and data parameters.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(match &cfg.data_csv {
        Some(path) => load_csv_dataset(path)?,
        None => synthetic_gaussian_dataset(cfg.dimension, cfg.samples, cfg.separation, derive_seed(cfg.seed, &[DATA_TAG]))?,
    })
}

/// Initial parameters drawn from `U[−π, π]`.
pub fn initial_parameters(cfg: &ExperimentConfig, count: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut rng = derived_rng(cfg.seed, &[INIT_TAG]);
    (0..count).map(|_| rng.random_range(-PI..=PI)).collect()
}

/// Generates or loads data, trains, and scores the held-out split.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = CircuitSpec::new(cfg.qubits, cfg.layers)?;
    let dataset = load_dataset(cfg)?;
    if dataset.dimension > 1 << cfg.qubits {
        return Err(HarnessError::config(format!(
            "{}-dimensional features do not fit {} qubits",
            dataset.dimension, cfg.qubits
        )));
    }
    let (train_set, test_set) = split_train_test(&dataset, cfg.train_fraction, derive_seed(cfg.seed, &[SPLIT_TAG]))?;
    let shots = match cfg.shots {
        0 => None,
        m => Some(ShotConfig::new(m, derive_seed(cfg.seed, &[SHOT_TAG]))?),
    };
    let mut objective = CircuitObjective::new(spec, &train_set.samples, cfg.batch, derive_seed(cfg.seed, &[BATCH_TAG]), shots)?
        .with_gradient_noise(cfg.noise_sigma)?;
    let mut optimizer = cfg.optimizer_config(derive_seed(cfg.seed, &[OPTIMIZER_TAG]))?.build()?;
    let theta0 = initial_parameters(cfg, spec.parameter_count());
    let trace = train(&mut objective, optimizer.as_mut(), &theta0, cfg.steps, cfg.log_every)?;
    let rows = trace_rows(&trace);
    let (final_loss, final_gradient_norm, reversal_count, violation_count) =
        summarize_trace(&rows).expect("the last step always logs the full loss");
    let accuracy_percent = accuracy(&spec, &trace.final_parameters, &test_set.samples)?;
    let report = ExperimentReport {
        schema: REPORT_SCHEMA.to_string(),
        config: ExperimentConfig { out: Default::default(), ..cfg.clone() },
        optimizer: cfg.optimizer.clone(),
        steps: cfg.steps,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        final_loss,
        final_gradient_norm,
        accuracy_percent,
        reversal_count,
        violation_count,
        final_parameters: ParameterVector::into_inner(trace.final_parameters),
        trace_file: TRACE_FILE.to_string(),
    };
    Ok(ExperimentOutcome { report, trace: rows, wall_time: started.elapsed() })
}

/// [`run_experiment`] followed by [`emit_report`] into `cfg.out`.
pub fn train_command(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let outcome = run_experiment(cfg)?;
    emit_report(&cfg.out, &outcome.report, &outcome.trace)?;
    Ok(outcome)
}

fn cell_dir(root: &Path, parameter: &str, value: &str) -> std::path::PathBuf {
    let safe: String = value.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    root.join(format!("{parameter}_{safe}"))
}

/// Runs one experiment per value of `parameter`, everything else fixed.
/// Cells share the base seed, hence the same data and initial point where
/// shapes allow. Writes one directory per cell and `aggregate.{csv,json}`
/// into `cfg.out`.
pub fn sweep(cfg: &ExperimentConfig, parameter: &str, values: &[String]) -> Result<(Aggregate, Vec<ExperimentOutcome>)> {
    let canonical = resolve_parameter(parameter).unwrap_or(parameter).to_string();
    if !SWEEP_PARAMETERS.contains(&canonical.as_str()) {
        return Err(HarnessError::config(format!(
            "cannot sweep {parameter:?}; expected one of {}",
            SWEEP_PARAMETERS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(HarnessError::config("sweep needs at least one value"));
    }
    let cells: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(&canonical, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let outcomes: Vec<ExperimentOutcome> = cells.par_iter().map(run_experiment).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(outcomes.len());
    for (value, outcome) in values.iter().zip(&outcomes) {
        emit_report(&cell_dir(&cfg.out, &canonical, value), &outcome.report, &outcome.trace)?;
        rows.push(AggregateRow { parameter: canonical.clone(), value: value.clone(), report: outcome.report.clone() });
    }
    let aggregate = Aggregate { schema: AGGREGATE_SCHEMA.to_string(), parameter: canonical, rows };
    write_aggregate(&cfg.out, &aggregate)?;
    Ok((aggregate, outcomes))
}

fn resolve_parameter(name: &str) -> Option<&'static str> {
    Some(match name {
        "eta_prime" => "eta_prime",
        "steps" | "epochs" => "steps",
        "dimension" | "d" => "dimension",
        "layers" => "layers",
        "noise_sigma" | "sigma" => "noise_sigma",
        "samples" | "train_size" => "samples",
        "optimizer" | "opt" => "optimizer",
        _ => return None,
    })
}

/// Trains every optimizer on seeds `cfg.seed .. cfg.seed + n_seeds`. For a
/// given seed all optimizers see the same data, initial point and batches.
pub fn compare_optimizers(cfg: &ExperimentConfig, optimizers: &[String], n_seeds: usize) -> Result<Comparison> {
    let mut unique: Vec<String> = Vec::new();
    for opt in optimizers {
        if !unique.contains(opt) {
            unique.push(opt.clone());
        }
    }
    if unique.len() < 2 {
        return Err(HarnessError::config("comparison needs at least two optimizers"));
    }
    if n_seeds == 0 {
        return Err(HarnessError::config("comparison needs at least one seed"));
    }
    let cells: Vec<ExperimentConfig> = unique
        .iter()
        .flat_map(|opt| {
            (0..n_seeds as u64).map(move |k| ExperimentConfig { optimizer: opt.clone(), seed: cfg.seed + k, ..cfg.clone() })
        })
        .collect();
    for c in &cells {
        c.validate()?;
    }
    let outcomes: Vec<ExperimentOutcome> = cells.par_iter().map(run_experiment).collect::<Result<_>>()?;
    for (c, o) in cells.iter().zip(&outcomes) {
        emit_report(&cfg.out.join(&c.optimizer).join(format!("seed_{}", c.seed)), &o.report, &o.trace)?;
    }
    let rows = unique
        .iter()
        .map(|opt| {
            let runs: Vec<&ExperimentReport> = outcomes.iter().map(|o| &o.report).filter(|r| &r.optimizer == opt).collect();
            let stat = |f: fn(&ExperimentReport) -> f64| MeanStd::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
            ComparisonRow {
                optimizer: opt.clone(),
                seeds: runs.len(),
                final_loss: stat(|r| r.final_loss),
                accuracy_percent: stat(|r| r.accuracy_percent),
                final_gradient_norm: stat(|r| r.final_gradient_norm),
                reversal_count: stat(|r| r.reversal_count as f64),
            }
        })
        .collect();
    let comparison = Comparison {
        schema: COMPARISON_SCHEMA.to_string(),
        rows,
        runs: outcomes.into_iter().map(|o| o.report).collect(),
    };
    write_comparison(&cfg.out, &comparison)?;
    Ok(comparison)
}
