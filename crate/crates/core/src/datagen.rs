//! Two-Gaussian synthetic data, stratified splitting and a CSV loader.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Label, Sample};
use crate::error::{Error, Result};
use crate::rng::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic { seed: u64, separation: f64 },
    Csv { path: PathBuf },
}

/// Unit-norm feature vectors with ±1 labels, all of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dimension: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label == Label::Positive).count();
        (self.samples.len() - pos, pos)
    }
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Draws `n` points, half from `N(−(sep/2)·u, I)` (label −1) and half from
/// `N(+(sep/2)·u, I)` (label +1), with `u` the unit all-ones direction.
/// Each point is projected to the unit sphere; labels keep the source class.
pub fn synthetic_gaussian_dataset(d: usize, n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(Error::argument(format!("dimension must be at least 2, got {d}")));
    }
    if n < 2 {
        return Err(Error::argument(format!("need at least 2 samples, got {n}")));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::argument(format!("separation must be positive, got {separation}")));
    }
    let mut rng = derived_rng(seed, &[0xDA7A]);
    let offset = 0.5 * separation / (d as f64).sqrt();
    let n_neg = n / 2;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i < n_neg { Label::Negative } else { Label::Positive };
        let shift = offset * label.value();
        let features = loop {
            let raw: Vec<f64> = (0..d)
                .map(|_| shift + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            if let Some(v) = normalized(raw) {
                break v;
            }
        };
        samples.push(Sample { features, label });
    }
    samples.shuffle(&mut rng);
    Ok(Dataset { samples, dimension: d, provenance: Provenance::Synthetic { seed, separation } })
}

/// Stratified shuffle split. Each class contributes
/// `round(fraction · class_size)` samples to the training side.
pub fn split_train_test(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::argument(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut rng = derived_rng(seed, &[0x5917]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.samples[i].label == label).collect();
        idx.shuffle(&mut rng);
        let k = (train_fraction * idx.len() as f64).round() as usize;
        train.extend(idx[..k].iter().map(|&i| dataset.samples[i].clone()));
        test.extend(idx[k..].iter().map(|&i| dataset.samples[i].clone()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::argument(format!(
            "train fraction {train_fraction} leaves one side of the split empty"
        )));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let wrap = |samples| Dataset {
        samples,
        dimension: dataset.dimension,
        provenance: dataset.provenance.clone(),
    };
    Ok((wrap(train), wrap(test)))
}

fn parse_label(cell: &str, row: usize) -> Result<i64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::Parse { row, message: format!("label '{cell}' is not numeric") })?;
    if v == -1.0 || v == 0.0 || v == 1.0 {
        Ok(v as i64)
    } else {
        Err(Error::Parse { row, message: format!("unknown label '{cell}'") })
    }
}

/// Loads `f0,…,f{d−1},label` rows. The header line is optional; labels may
/// be ±1 or 0/1 (0 is read as −1). Features are rescaled to unit norm.
pub fn load_csv_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width: Option<usize> = None;
    let mut rows: Vec<(usize, Vec<f64>, i64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            if record.len() < 2 {
                return Err(Error::Parse { row, message: "header needs at least one feature and a label".into() });
            }
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if expected < 2 {
            return Err(Error::Parse { row, message: "row needs at least one feature and a label".into() });
        }
        if record.len() != expected {
            return Err(Error::Parse {
                row,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let features = record
            .iter()
            .take(expected - 1)
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { row, message: format!("column {col}: '{cell}' is not a finite number") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = parse_label(&record[expected - 1], row)?;
        rows.push((row, features, label));
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, message: "no data rows".into() });
    }

    let has_zero = rows.iter().any(|r| r.2 == 0);
    let has_neg = rows.iter().any(|r| r.2 == -1);
    let mut samples = Vec::with_capacity(rows.len());
    for (row, features, raw) in rows {
        let label = match (raw, has_zero) {
            (1, _) => Label::Positive,
            (0, _) => Label::Negative,
            (-1, false) => Label::Negative,
            _ => {
                debug_assert!(has_zero && has_neg);
                return Err(Error::Parse { row, message: "labels mix {-1,+1} and {0,1} conventions".into() });
            }
        };
        let features = normalized(features).ok_or(Error::Parse { row, message: "feature vector has zero norm".into() })?;
        samples.push(Sample { features, label });
    }
    let dimension = width.unwrap_or(0) - 1;
    Ok(Dataset { samples, dimension, provenance: Provenance::Csv { path: path.to_path_buf() } })
}

/// Writes `f0,…,label` with a header, labels as ±1.
pub fn write_csv_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header: Vec<String> = (0..dataset.dimension).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io_err)?;
    for s in &dataset.samples {
        let mut rec: Vec<String> = s.features.iter().map(|f| format!("{f:.17e}")).collect();
        rec.push(format!("{}", s.label.value() as i64));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}
