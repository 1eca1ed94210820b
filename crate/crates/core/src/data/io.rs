//! CSV ingestion and export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use super::{Outcome, RctDataset, SyntheticGroundTruth};
use crate::error::{invalid, Result, UpliftError};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, streams};

pub const CRITEO_FEATURES: [&str; 12] =
    ["f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11"];
pub const CRITEO_OUTCOMES: [&str; 3] = ["visit", "conversion", "exposure"];

#[derive(Clone, Copy, Debug, Default)]
pub struct CriteoLoadOptions {
    /// Keep a uniform sample of at most this many rows (reservoir sampling).
    pub max_rows: Option<usize>,
    pub seed: u64,
}

/// Loads the public uplift benchmark file with one chosen outcome.
pub fn load_criteo_csv(path: impl AsRef<Path>, outcome_name: &str) -> Result<RctDataset> {
    load_criteo_csv_with(path, outcome_name, CriteoLoadOptions::default())
}

pub fn load_criteo_csv_with(
    path: impl AsRef<Path>,
    outcome_name: &str,
    opts: CriteoLoadOptions,
) -> Result<RctDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| UpliftError::Schema(format!("missing column '{name}'")))
    };
    let feat_idx: Vec<usize> = CRITEO_FEATURES.iter().map(|f| find(f)).collect::<Result<_>>()?;
    let w_idx = find("treatment")?;
    let y_idx = find(outcome_name)?;

    let d = CRITEO_FEATURES.len();
    let mut rows: Vec<(Vec<f64>, u8, f64)> = Vec::new();
    let mut rng = stream_rng(opts.seed, streams::SUBSAMPLE);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| UpliftError::Row { row: i, message: e.to_string() })?;
        let field = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse::<f64>().map_err(|_| UpliftError::Row {
                row: i,
                message: format!("column '{}': cannot parse '{s}'", &headers[j]),
            })
        };
        let mut x = Vec::with_capacity(d);
        for &j in &feat_idx {
            x.push(field(j)?);
        }
        let w = field(w_idx)?;
        if w != 0.0 && w != 1.0 {
            return Err(UpliftError::Row { row: i, message: format!("treatment must be 0 or 1, got {w}") });
        }
        let y = field(y_idx)?;
        let row = (x, w as u8, y);
        match opts.max_rows {
            Some(cap) if rows.len() >= cap => {
                let k = rng.random_range(0..=i);
                if k < cap {
                    rows[k] = row;
                }
            }
            _ => rows.push(row),
        }
    }
    if rows.is_empty() {
        return invalid("file has no data rows");
    }
    let n = rows.len();
    let mut data = Vec::with_capacity(n * d);
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (x, wi, yi) in rows {
        data.extend(x);
        w.push(wi);
        y.push(yi);
    }
    RctDataset::from_trial(
        Matrix::new(n, d, data)?,
        CRITEO_FEATURES.iter().map(|s| s.to_string()).collect(),
        w,
        vec![Outcome::new(outcome_name, y)],
    )
}

/// Writes `x0..x{d-1},treatment,<outcomes...>` using the dataset's own
/// feature names.
pub fn write_dataset_csv(dataset: &RctDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push("treatment");
    header.extend(dataset.outcome_names());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.n() {
        let mut line = String::new();
        for v in dataset.features().row(i) {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&dataset.treatment()[i].to_string());
        for o in dataset.outcomes() {
            line.push_str(&format!(",{}", o.values[i]));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar with one column per true effect, e.g. `tau_revenue,tau_engagement`.
pub fn write_ground_truth_csv(truth: &SyntheticGroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = truth.taus.iter().map(|(n, _)| format!("tau_{n}")).collect();
    writeln!(out, "{}", header.join(","))?;
    let n = truth.taus.first().map_or(0, |(_, v)| v.len());
    for i in 0..n {
        let line: Vec<String> = truth.taus.iter().map(|(_, v)| v[i].to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the internal export format: columns before `treatment` are features,
/// columns after it are outcomes. Propensity is the treated fraction.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<RctDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let w_idx = headers
        .iter()
        .position(|h| h == "treatment")
        .ok_or_else(|| UpliftError::Schema("missing column 'treatment'".into()))?;
    let feature_names = headers[..w_idx].to_vec();
    let outcome_names = headers[w_idx + 1..].to_vec();
    let d = feature_names.len();
    let mut data = Vec::new();
    let mut w = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); outcome_names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| UpliftError::Row { row: i, message: e.to_string() })?;
        let field = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse::<f64>().map_err(|_| UpliftError::Row {
                row: i,
                message: format!("column '{}': cannot parse '{s}'", headers[j]),
            })
        };
        for j in 0..d {
            data.push(field(j)?);
        }
        let wi = field(w_idx)?;
        if wi != 0.0 && wi != 1.0 {
            return Err(UpliftError::Row { row: i, message: format!("treatment must be 0 or 1, got {wi}") });
        }
        w.push(wi as u8);
        for (k, y) in ys.iter_mut().enumerate() {
            y.push(field(w_idx + 1 + k)?);
        }
    }
    let n = w.len();
    RctDataset::from_trial(
        Matrix::new(n, d, data)?,
        feature_names,
        w,
        outcome_names.into_iter().zip(ys).map(|(n, v)| Outcome::new(n, v)).collect(),
    )
}
