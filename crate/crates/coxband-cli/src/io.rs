//! Data ingestion and machine-readable output for the command-line tool.
//!
//! Input CSVs carry one row per counting-process interval: an `id` column
//! (string subject label), an optional `start` column (defaults to 0),
//! `stop`, `status` (0 or 1), and every remaining column is a numeric
//! covariate, taken in header order. All numbers are written in shortest
//! round-trip decimal form, so re-reading an output reproduces the exact
//! values and repeated runs produce byte-identical files.

use crate::CliError;
use coxband::{validate_dataset, ConfidenceBand, StepFunction, SurvivalDataset, SurvivalRow};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Shortest decimal form that parses back to exactly the same float.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Reads a counting-process dataset; returns it with the covariate column
/// names in header order.
pub fn read_csv(path: &Path) -> Result<(SurvivalDataset, Vec<String>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| data_err(format!("{}: {e}", path.display())))?
        .clone();

    let mut id_idx = None;
    let mut start_idx = None;
    let mut stop_idx = None;
    let mut status_idx = None;
    let mut cov_cols: Vec<(usize, String)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        match name {
            "id" => id_idx = Some(i),
            "start" => start_idx = Some(i),
            "stop" => stop_idx = Some(i),
            "status" => status_idx = Some(i),
            other => cov_cols.push((i, other.to_string())),
        }
    }
    let id_idx = id_idx.ok_or_else(|| data_err("missing required column `id`"))?;
    let stop_idx = stop_idx.ok_or_else(|| data_err("missing required column `stop`"))?;
    let status_idx = status_idx.ok_or_else(|| data_err("missing required column `status`"))?;
    if cov_cols.is_empty() {
        return Err(data_err("at least one covariate column is required"));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str, CliError> {
            record
                .get(idx)
                .ok_or_else(|| data_err(format!("line {line}: too few fields")))
        };
        let num = |idx: usize, what: &str| -> Result<f64, CliError> {
            let raw = field(idx)?;
            raw.parse::<f64>()
                .map_err(|_| data_err(format!("line {line}: `{what}` value {raw:?} is not a number")))
        };

        let id = field(id_idx)?.to_string();
        let start = match start_idx {
            Some(i) => num(i, "start")?,
            None => 0.0,
        };
        let stop = num(stop_idx, "stop")?;
        let status = match field(status_idx)? {
            "0" => false,
            "1" => true,
            other => {
                return Err(data_err(format!(
                    "line {line}: `status` value {other:?} is not 0 or 1"
                )))
            }
        };
        let mut covariates = Vec::with_capacity(cov_cols.len());
        for (i, name) in &cov_cols {
            covariates.push(num(*i, name)?);
        }
        rows.push(SurvivalRow::new(id, start, stop, status, covariates));
    }

    let names = cov_cols.into_iter().map(|(_, n)| n).collect();
    let ds = validate_dataset(rows).map_err(|e| data_err(e.to_string()))?;
    Ok((ds, names))
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

/// Renders a band as CSV with the stable column order
/// `t,estimate,lower,upper,pw_lower,pw_upper`.
pub fn band_csv(band: &ConfidenceBand) -> String {
    let mut out = String::from("t,estimate,lower,upper,pw_lower,pw_upper\n");
    for j in 0..band.grid.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(band.grid[j]),
            fmt_f64(band.estimate[j]),
            fmt_f64(band.lower[j]),
            fmt_f64(band.upper[j]),
            fmt_f64(band.pointwise_lower[j]),
            fmt_f64(band.pointwise_upper[j]),
        );
    }
    out
}

/// Everything a plotting or archival consumer needs to reproduce the band.
#[derive(Serialize)]
pub struct BandDocument<'a> {
    pub schema_version: u32,
    /// `cumulative_hazard` or `survival`.
    pub kind: &'a str,
    #[serde(flatten)]
    pub band: &'a ConfidenceBand,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize)]
pub struct Diagnostics {
    pub scheme: String,
    pub increments: String,
    pub multiplier: String,
    pub b_requested: usize,
    pub n_failed: usize,
    pub seed: u64,
    pub n_subjects: usize,
}

pub fn to_json_string<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc)
        .map_err(|e| data_err(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Breslow baseline as CSV: `t,jump,cumulative`.
pub fn baseline_csv(baseline: &StepFunction) -> String {
    let mut out = String::from("t,jump,cumulative\n");
    let mut cum = 0.0;
    for (t, j) in baseline.times().iter().zip(baseline.jumps()) {
        cum += j;
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*j), fmt_f64(cum));
    }
    out
}

/// Coverage tallies as CSV, one row per band variant.
pub fn coverage_csv(result: &coxband::CoverageResult) -> String {
    let mut out = String::from(
        "weight,transform,covered,evaluated,band_failures,rate,mc_se,mean_width\n",
    );
    for cell in &result.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            weight_token(cell.weight),
            transform_token(cell.transform),
            cell.covered,
            cell.evaluated,
            cell.band_failures,
            fmt_f64(cell.rate()),
            fmt_f64(cell.mc_se()),
            fmt_f64(cell.mean_width),
        );
    }
    out
}

pub(crate) fn weight_token(w: coxband::WeightKind) -> &'static str {
    match w {
        coxband::WeightKind::EqualPrecision => "ep",
        coxband::WeightKind::HallWellner => "hw",
    }
}

pub(crate) fn transform_token(t: coxband::Transform) -> &'static str {
    match t {
        coxband::Transform::Identity => "id",
        coxband::Transform::Log => "log",
    }
}
