//! Right-continuous step functions with jumps at a finite set of times.

use crate::error::Error;

/// A nondecreasing-knot step function `F(t) = Σ_{u_k ≤ t} j_k`, stored as
/// strictly increasing jump times with their (possibly negative) jump sizes
/// and a cached cumulative sum. This is the carrier for cumulative-hazard
/// estimates and their bootstrap counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    times: Vec<f64>,
    jumps: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function from strictly increasing, finite jump times and
    /// finite jump sizes. Jump sizes may be negative: bootstrap baselines
    /// carry signed corrections.
    pub fn new(times: Vec<f64>, jumps: Vec<f64>) -> Result<Self, Error> {
        if times.len() != jumps.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: jumps.len(),
            });
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::config(format!("jump time {t} is not finite")));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::config(format!(
                    "jump times must be strictly increasing ({} then {t})",
                    times[k - 1]
                )));
            }
        }
        if let Some(&j) = jumps.iter().find(|j| !j.is_finite()) {
            return Err(Error::config(format!("jump size {j} is not finite")));
        }
        let mut cumulative = Vec::with_capacity(jumps.len());
        let mut acc = 0.0;
        for &j in &jumps {
            acc += j;
            cumulative.push(acc);
        }
        Ok(StepFunction {
            times,
            jumps,
            cumulative,
        })
    }

    /// The identically-zero function (no jumps).
    pub fn empty() -> Self {
        StepFunction {
            times: Vec::new(),
            jumps: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    /// Right-continuous evaluation: the sum of jumps at times `u ≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&u| u <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Jump locations, strictly increasing.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Jump sizes, aligned with [`times`](Self::times).
    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Total mass, i.e. the value from the last jump onward.
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The same jump times with every jump scaled by `factor` (used to move a
    /// baseline hazard to a covariate profile).
    pub fn scaled(&self, factor: f64) -> StepFunction {
        let jumps: Vec<f64> = self.jumps.iter().map(|j| j * factor).collect();
        let mut cumulative = Vec::with_capacity(jumps.len());
        let mut acc = 0.0;
        for &j in &jumps {
            acc += j;
            cumulative.push(acc);
        }
        StepFunction {
            times: self.times.clone(),
            jumps,
            cumulative,
        }
    }

    /// Evaluates the function at each point of an ascending grid in one merge
    /// pass (cheaper than repeated binary searches in hot loops).
    pub(crate) fn eval_grid_into(&self, grid: &[f64], out: &mut [f64]) {
        debug_assert_eq!(grid.len(), out.len());
        let mut k = 0;
        let mut acc = 0.0;
        for (j, &t) in grid.iter().enumerate() {
            while k < self.times.len() && self.times[k] <= t {
                acc = self.cumulative[k];
                k += 1;
            }
            out[j] = acc;
        }
    }
}
