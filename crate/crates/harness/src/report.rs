//! Persisted artifacts. Reals in CSV files carry 17 significant digits;
//! JSON files carry a schema tag.

use std::fs;
use std::path::Path;

use nlr_core::optim::TrainTrace;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const REPORT_SCHEMA: &str = "nlrq.report.v1";
pub const AGGREGATE_SCHEMA: &str = "nlrq.aggregate.v1";
pub const COMPARISON_SCHEMA: &str = "nlrq.comparison.v1";

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub const TRACE_COLUMNS: [&str; 5] = ["step", "minibatch_loss", "full_loss_if_logged", "grad_norm", "event_kind"];
pub const REPORT_COLUMNS: [&str; 9] = [
    "optimizer",
    "seed",
    "steps",
    "final_loss",
    "final_gradient_norm",
    "accuracy_percent",
    "reversal_count",
    "violation_count",
    "trace_file",
];

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Summary of one training run.
///
/// `final_loss` is the full training-set loss after the last step and
/// `final_gradient_norm` the last step's mini-batch gradient norm; both are
/// the last row of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub optimizer: String,
    pub steps: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub final_loss: f64,
    pub final_gradient_norm: f64,
    pub accuracy_percent: f64,
    pub reversal_count: usize,
    pub violation_count: usize,
    pub final_parameters: Vec<f64>,
    pub trace_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub minibatch_loss: f64,
    pub full_loss_if_logged: Option<f64>,
    pub grad_norm: f64,
    pub event_kind: String,
}

pub fn trace_rows(trace: &TrainTrace) -> Vec<TraceRow> {
    trace
        .events
        .iter()
        .zip(&trace.full_losses)
        .enumerate()
        .map(|(step, (ev, full))| TraceRow {
            step,
            minibatch_loss: ev.loss_before,
            full_loss_if_logged: *full,
            grad_norm: ev.grad_norm,
            event_kind: ev.kind.as_str().to_string(),
        })
        .collect()
}

/// Numbers a report derives from its trace: final loss, final gradient
/// norm, reversal count and violation count.
pub fn summarize_trace(rows: &[TraceRow]) -> Option<(f64, f64, usize, usize)> {
    let last = rows.last()?;
    let reversals = rows.iter().filter(|r| r.event_kind == "reversal").count();
    let violations =
        rows.iter().filter(|r| matches!(r.event_kind.as_str(), "reversal" | "perturbation" | "backtracked")).count();
    Some((last.full_loss_if_logged?, last.grad_norm, reversals, violations))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e.into()))
}

fn write_records<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| HarnessError::io(path, e.into());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e.into()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::io(path, e.into()))
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_records(
        path,
        &TRACE_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.step.to_string(),
                fmt_real(r.minibatch_loss),
                r.full_loss_if_logged.map(fmt_real).unwrap_or_default(),
                fmt_real(r.grad_norm),
                r.event_kind.clone(),
            ]
        }),
    )
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e.into()))?;
    r.deserialize().map(|row| row.map_err(|e: csv::Error| HarnessError::io(path, e.into()))).collect()
}

fn report_record(r: &ExperimentReport) -> Vec<String> {
    vec![
        r.optimizer.clone(),
        r.config.seed.to_string(),
        r.steps.to_string(),
        fmt_real(r.final_loss),
        fmt_real(r.final_gradient_norm),
        fmt_real(r.accuracy_percent),
        r.reversal_count.to_string(),
        r.violation_count.to_string(),
        r.trace_file.clone(),
    ]
}

pub fn write_report_csv(path: &Path, reports: &[&ExperimentReport]) -> Result<()> {
    write_records(path, &REPORT_COLUMNS, reports.iter().map(|r| report_record(r)))
}

/// Writes `report.json`, `report.csv` and `trace.csv` into `dir`.
pub fn emit_report(dir: &Path, report: &ExperimentReport, trace: &[TraceRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_json(&dir.join(REPORT_JSON), report)?;
    write_report_csv(&dir.join(REPORT_CSV), &[report])?;
    write_trace_csv(&dir.join(&report.trace_file), trace)
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub parameter: String,
    pub value: String,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema: String,
    pub parameter: String,
    pub rows: Vec<AggregateRow>,
}

pub const AGGREGATE_COLUMNS: [&str; 8] =
    ["parameter", "value", "optimizer", "seed", "final_loss", "final_gradient_norm", "accuracy_percent", "reversal_count"];

pub fn write_aggregate(dir: &Path, aggregate: &Aggregate) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_json(&dir.join("aggregate.json"), aggregate)?;
    write_records(
        &dir.join("aggregate.csv"),
        &AGGREGATE_COLUMNS,
        aggregate.rows.iter().map(|row| {
            let r = &row.report;
            vec![
                row.parameter.clone(),
                row.value.clone(),
                r.optimizer.clone(),
                r.config.seed.to_string(),
                fmt_real(r.final_loss),
                fmt_real(r.final_gradient_norm),
                fmt_real(r.accuracy_percent),
                r.reversal_count.to_string(),
            ]
        }),
    )
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub optimizer: String,
    pub seeds: usize,
    pub final_loss: MeanStd,
    pub accuracy_percent: MeanStd,
    pub final_gradient_norm: MeanStd,
    pub reversal_count: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema: String,
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<ExperimentReport>,
}

impl Comparison {
    pub fn row(&self, optimizer: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.optimizer == optimizer)
    }
}

pub const COMPARISON_COLUMNS: [&str; 10] = [
    "optimizer",
    "seeds",
    "final_loss_mean",
    "final_loss_std",
    "accuracy_percent_mean",
    "accuracy_percent_std",
    "final_gradient_norm_mean",
    "final_gradient_norm_std",
    "reversal_count_mean",
    "reversal_count_std",
];

pub fn write_comparison(dir: &Path, comparison: &Comparison) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_json(&dir.join("comparison.json"), comparison)?;
    write_records(
        &dir.join("comparison.csv"),
        &COMPARISON_COLUMNS,
        comparison.rows.iter().map(|r| {
            vec![
                r.optimizer.clone(),
                r.seeds.to_string(),
                fmt_real(r.final_loss.mean),
                fmt_real(r.final_loss.std),
                fmt_real(r.accuracy_percent.mean),
                fmt_real(r.accuracy_percent.std),
                fmt_real(r.final_gradient_norm.mean),
                fmt_real(r.final_gradient_norm.std),
                fmt_real(r.reversal_count.mean),
                fmt_real(r.reversal_count.std),
            ]
        }),
    )
}

/// Every `report.json` below `root`, in path order.
pub fn find_reports(root: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut found = Vec::new();
    let mut pending = vec![root.to_path_buf()];
    while let Some(dir) = pending.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| HarnessError::io(&dir, e))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.file_name().is_some_and(|n| n == REPORT_JSON) {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Reads a report and checks its derived numbers against its trace.
pub fn load_verified_report(path: &Path) -> Result<ExperimentReport> {
    let report: ExperimentReport = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let rows = read_trace_csv(&dir.join(&report.trace_file))?;
    let recomputed = summarize_trace(&rows);
    let stated = (report.final_loss, report.final_gradient_norm, report.reversal_count, report.violation_count);
    if rows.len() != report.steps || recomputed != Some(stated) {
        return Err(HarnessError::Runtime(nlr_core::Error::Numeric(format!(
            "{} disagrees with its trace: stated {stated:?}, trace gives {recomputed:?} over {} rows",
            path.display(),
            rows.len()
        ))));
    }
    Ok(report)
}

/// Verifies every report under `root` and writes `summary.csv` there.
pub fn summarize_reports(root: &Path) -> Result<Vec<ExperimentReport>> {
    let paths = find_reports(root)?;
    let reports = paths.iter().map(|p| load_verified_report(p)).collect::<Result<Vec<_>>>()?;
    let mut header = vec!["report"];
    header.extend(REPORT_COLUMNS);
    write_records(
        &root.join("summary.csv"),
        &header,
        paths.iter().zip(&reports).map(|(p, r)| {
            let rel = p.strip_prefix(root).unwrap_or(p);
            let mut rec = vec![rel.display().to_string()];
            rec.extend(report_record(r));
            rec
        }),
    )?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, -2.5e7] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            TraceRow { step: 0, minibatch_loss: 1.5, full_loss_if_logged: None, grad_norm: 0.25, event_kind: "reversal".into() },
            TraceRow { step: 1, minibatch_loss: 0.1, full_loss_if_logged: Some(0.3), grad_norm: 0.2, event_kind: "descent_accepted".into() },
        ];
        let path = dir.path().join(TRACE_FILE);
        write_trace_csv(&path, &rows).unwrap();
        assert_eq!(read_trace_csv(&path).unwrap(), rows);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,minibatch_loss,full_loss_if_logged,grad_norm,event_kind\n"));
        assert_eq!(summarize_trace(&rows), Some((0.3, 0.2, 1, 1)));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }
}
