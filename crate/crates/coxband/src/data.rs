//! Counting-process survival data: validated rows plus the sorted views and
//! event-time tables every estimator in the crate shares.

use crate::error::Error;
use std::collections::HashMap;

/// One observation interval `(start, stop]` for a subject, with the event
/// indicator for the interval's right endpoint and a fixed covariate vector.
/// A subject may contribute several non-overlapping rows (delayed entry,
/// interval splits); multiplier resampling attaches to the subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub subject: String,
    pub start: f64,
    pub stop: f64,
    pub status: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRow {
    pub fn new(
        subject: impl Into<String>,
        start: f64,
        stop: f64,
        status: bool,
        covariates: Vec<f64>,
    ) -> Self {
        SurvivalRow {
            subject: subject.into(),
            start,
            stop,
            status,
            covariates,
        }
    }
}

/// A validated dataset. Construction via [`validate_dataset`] checks every
/// row and precomputes the event-time table and the sorted row orders used
/// by the risk-set sweeps, so estimators can assume a clean, indexed view.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    rows: Vec<SurvivalRow>,
    p: usize,
    tau: f64,
    n_subjects: usize,
    subject_of_row: Vec<usize>,
    event_times: Vec<f64>,
    event_d: Vec<f64>,
    event_row_offsets: Vec<usize>,
    event_rows: Vec<usize>,
    by_stop_desc: Vec<usize>,
    by_start_desc: Vec<usize>,
}

/// Checks rows for structural validity and assembles the indexed dataset.
///
/// Requirements: at least one row, at least one covariate, finite values,
/// `0 ≤ start < stop`, consistent covariate dimension, nonempty subject
/// labels. Tied event times are grouped by exact floating-point equality.
pub fn validate_dataset(rows: Vec<SurvivalRow>) -> Result<SurvivalDataset, Error> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = rows[0].covariates.len();
    if p == 0 {
        return Err(Error::InvalidRow {
            row: 0,
            message: "at least one covariate column is required".into(),
        });
    }

    let mut subject_index: HashMap<&str, usize> = HashMap::new();
    let mut subject_of_row = Vec::with_capacity(rows.len());
    let mut tau = f64::NEG_INFINITY;
    for (r, row) in rows.iter().enumerate() {
        if row.subject.is_empty() {
            return Err(Error::InvalidRow {
                row: r,
                message: "subject label is empty".into(),
            });
        }
        if !row.start.is_finite() || !row.stop.is_finite() {
            return Err(Error::InvalidRow {
                row: r,
                message: format!("non-finite interval ({}, {}]", row.start, row.stop),
            });
        }
        if row.start < 0.0 {
            return Err(Error::InvalidRow {
                row: r,
                message: format!("negative entry time {}", row.start),
            });
        }
        if row.start >= row.stop {
            return Err(Error::InvalidRow {
                row: r,
                message: format!("interval ({}, {}] is empty", row.start, row.stop),
            });
        }
        if row.covariates.len() != p {
            return Err(Error::CovariateDimension {
                row: r,
                expected: p,
                got: row.covariates.len(),
            });
        }
        if let Some(&x) = row.covariates.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidRow {
                row: r,
                message: format!("non-finite covariate {x}"),
            });
        }
        tau = tau.max(row.stop);
        let next = subject_index.len();
        let idx = *subject_index.entry(row.subject.as_str()).or_insert(next);
        subject_of_row.push(idx);
    }
    let n_subjects = subject_index.len();
    drop(subject_index);

    // Event-time table: distinct times ascending, tied rows grouped.
    let mut event_row_order: Vec<usize> = (0..rows.len()).filter(|&r| rows[r].status).collect();
    event_row_order.sort_by(|&a, &b| rows[a].stop.total_cmp(&rows[b].stop));
    let mut event_times = Vec::new();
    let mut event_d = Vec::new();
    let mut event_row_offsets = vec![0usize];
    for &r in &event_row_order {
        if event_times.last() != Some(&rows[r].stop) {
            event_times.push(rows[r].stop);
            event_d.push(0.0);
            event_row_offsets.push(*event_row_offsets.last().unwrap());
        }
        *event_d.last_mut().unwrap() += 1.0;
        *event_row_offsets.last_mut().unwrap() += 1;
    }

    let mut by_stop_desc: Vec<usize> = (0..rows.len()).collect();
    by_stop_desc.sort_by(|&a, &b| rows[b].stop.total_cmp(&rows[a].stop));
    let mut by_start_desc: Vec<usize> = (0..rows.len()).collect();
    by_start_desc.sort_by(|&a, &b| rows[b].start.total_cmp(&rows[a].start));

    Ok(SurvivalDataset {
        rows,
        p,
        tau,
        n_subjects,
        subject_of_row,
        event_times,
        event_d,
        event_row_offsets,
        event_rows: event_row_order,
        by_stop_desc,
        by_start_desc,
    })
}

impl SurvivalDataset {
    pub fn rows(&self) -> &[SurvivalRow] {
        &self.rows
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of distinct subjects (the resampling unit).
    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    /// Index of the subject that row `r` belongs to.
    pub fn subject_of_row(&self, r: usize) -> usize {
        self.subject_of_row[r]
    }

    /// Distinct observed event times, ascending.
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// The event times as an owned grid (the default evaluation grid for
    /// bootstrap variance estimates).
    pub fn event_grid(&self) -> Vec<f64> {
        self.event_times.clone()
    }

    /// Follow-up horizon: the largest stop time unless extended.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Returns a copy with the query horizon extended to `tau` (which must
    /// not cut into the observed data).
    pub fn with_tau(&self, tau: f64) -> Result<SurvivalDataset, Error> {
        let observed = self
            .rows
            .iter()
            .map(|r| r.stop)
            .fold(f64::NEG_INFINITY, f64::max);
        if tau < observed {
            return Err(Error::config(format!(
                "horizon {tau} is below the last observed time {observed}"
            )));
        }
        let mut out = self.clone();
        out.tau = tau;
        Ok(out)
    }

    /// Tied-event counts per distinct event time.
    pub(crate) fn event_d(&self) -> &[f64] {
        &self.event_d
    }

    /// Rows with an event at the `k`-th distinct event time.
    pub(crate) fn event_rows_at(&self, k: usize) -> &[usize] {
        &self.event_rows[self.event_row_offsets[k]..self.event_row_offsets[k + 1]]
    }

    pub(crate) fn by_stop_desc(&self) -> &[usize] {
        &self.by_stop_desc
    }

    pub(crate) fn by_start_desc(&self) -> &[usize] {
        &self.by_start_desc
    }
}
