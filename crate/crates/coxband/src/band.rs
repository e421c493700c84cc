//! Time-simultaneous and pointwise confidence bands for the cumulative
//! hazard and derived survival curves, plus restricted-residual-mean
//! intervals. Critical values are order statistics of weighted sup
//! deviations across bootstrap replicates.

use crate::boot::{converged_values, sigma2_from_values, BootstrapReplicate, ReplicateSet};
use crate::cox::FittedCox;
use crate::error::Error;
use crate::step::StepFunction;
use ndarray::Array1;
use serde::Serialize;

/// Weight family applied to the deviation process before taking suprema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum WeightKind {
    /// `√n / σ̂(t)`: equal standardized precision across the interval.
    EqualPrecision,
    /// `√n / (1 + σ̂²(t))`: bounded weights that tolerate vanishing variance.
    HallWellner,
}

/// Scale on which the band is built before mapping back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Transform {
    /// Additive band around the estimate, lower edge clipped at zero.
    Identity,
    /// Multiplicative band from the log-transformed deviation; stays
    /// positive wherever the estimate is positive.
    Log,
}

/// A band request: time interval, level, weight family, and transform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandSpec {
    /// `(t1, t2)` with `0 ≤ t1 < t2`.
    pub interval: (f64, f64),
    /// Miscoverage level in `(0, 1)`.
    pub alpha: f64,
    pub weight: WeightKind,
    pub transform: Transform,
}

/// A fitted confidence band on its evaluation grid: simultaneous and
/// pointwise limits around the estimate, with the critical value and the
/// number of converged replicates that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceBand {
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub pointwise_lower: Vec<f64>,
    pub pointwise_upper: Vec<f64>,
    /// Critical value of the weighted sup statistic (identity scale).
    pub c_star: f64,
    /// Converged replicates used.
    pub b_used: usize,
    pub spec: BandSpec,
}

/// A two-sided interval for a scalar functional.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RrmInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Band weights `g_n(t_j)` on a grid, from the variance estimates and (for
/// the log transform) the estimate itself. Since this function does not see
/// the grid times, the `t` carried by a [`Error::ZeroVarianceOnGrid`] or
/// [`Error::ZeroEstimateOnGrid`] is the zero-based grid index; the band
/// builders remap it to the offending time.
pub fn weight_values(
    spec: &BandSpec,
    sigma2: &[f64],
    estimate: &[f64],
    n: usize,
) -> Result<Vec<f64>, Error> {
    if sigma2.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma2.len(),
            got: estimate.len(),
        });
    }
    if n == 0 {
        return Err(Error::config("weight normalization needs n >= 1"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut g = Vec::with_capacity(sigma2.len());
    for (j, (&s2, &est)) in sigma2.iter().zip(estimate).enumerate() {
        let base = match spec.weight {
            WeightKind::EqualPrecision => {
                if !(s2 > 0.0) {
                    return Err(Error::ZeroVarianceOnGrid { t: j as f64 });
                }
                sqrt_n / s2.sqrt()
            }
            WeightKind::HallWellner => sqrt_n / (1.0 + s2),
        };
        let value = match spec.transform {
            Transform::Identity => base,
            Transform::Log => {
                if !(est > 0.0) {
                    return Err(Error::ZeroEstimateOnGrid { t: j as f64 });
                }
                base * est
            }
        };
        if !value.is_finite() {
            return Err(Error::config(format!("non-finite band weight at grid index {j}")));
        }
        g.push(value);
    }
    Ok(g)
}

/// Weighted sup deviation of one replicate from the fitted baseline over the
/// grid: `max_j weights[j] · √n · |Λ*(t_j) − Λ̂(t_j)|`. The weights are the
/// `√n`-normalized band weights `g_n/√n`.
pub fn sup_statistic(
    rep: &BootstrapReplicate,
    fitted: &FittedCox,
    weights: &[f64],
    grid: &[f64],
    n: usize,
) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let mut sup = 0.0_f64;
    for (&w, &t) in weights.iter().zip(grid) {
        let s = w * sqrt_n * (rep.baseline_star.eval(t) - fitted.baseline.eval(t)).abs();
        if s > sup {
            sup = s;
        }
    }
    sup
}

fn sup_from_values(values: &[f64], estimate: &[f64], weights: &[f64], sqrt_n: f64) -> f64 {
    let mut sup = 0.0_f64;
    for j in 0..estimate.len() {
        let s = weights[j] * sqrt_n * (values[j] - estimate[j]).abs();
        if s > sup {
            sup = s;
        }
    }
    sup
}

/// The bootstrap critical value: the `⌈(B + 1)(1 − α)⌉`-th order statistic
/// of the replicate sup statistics. Requires `B ≥ ⌈1/α⌉` replicates; at the
/// boundary the rule selects the maximum.
pub fn critical_value(sups: &[f64], alpha: f64) -> Result<f64, Error> {
    if !alpha.is_finite() || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie strictly in (0, 1), got {alpha}")));
    }
    if sups.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("sup statistics must be finite"));
    }
    // The epsilon guards absorb one-ulp excesses in products like
    // 1000 × 0.9, which must select rank 900, not 901.
    let required = ((1.0 / alpha) - 1e-9).ceil() as usize;
    if sups.len() < required {
        return Err(Error::TooFewReplicates {
            required,
            got: sups.len(),
        });
    }
    let b = sups.len();
    let rank = (((b + 1) as f64) * (1.0 - alpha) - 1e-9).ceil() as usize;
    let rank = rank.clamp(1, b);
    let mut sorted = sups.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

fn validate_spec(spec: &BandSpec) -> Result<(), Error> {
    if !spec.alpha.is_finite() || !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Error::config(format!(
            "alpha must lie strictly in (0, 1), got {}",
            spec.alpha
        )));
    }
    let (t1, t2) = spec.interval;
    if !t1.is_finite() || !t2.is_finite() || t1 < 0.0 || t1 >= t2 {
        return Err(Error::config(format!(
            "band interval must satisfy 0 <= t1 < t2, got ({t1}, {t2})"
        )));
    }
    Ok(())
}

/// Band grid: the fitted baseline's jump times inside the interval, plus the
/// interval endpoints.
fn band_grid(baseline: &StepFunction, interval: (f64, f64)) -> Result<Vec<f64>, Error> {
    let (t1, t2) = interval;
    let mut grid: Vec<f64> = baseline
        .times()
        .iter()
        .copied()
        .filter(|t| (t1..=t2).contains(t))
        .collect();
    if grid.is_empty() {
        return Err(Error::NoEventsInInterval { t1, t2 });
    }
    if grid[0] != t1 {
        grid.insert(0, t1);
    }
    if *grid.last().unwrap() != t2 {
        grid.push(t2);
    }
    Ok(grid)
}

fn remap_grid_error(err: Error, grid: &[f64]) -> Error {
    match err {
        Error::ZeroVarianceOnGrid { t } => Error::ZeroVarianceOnGrid { t: grid[t as usize] },
        Error::ZeroEstimateOnGrid { t } => Error::ZeroEstimateOnGrid { t: grid[t as usize] },
        other => other,
    }
}

/// Shared cumulative-hazard band core. `profile` carries the estimate's
/// scale factor and one factor per replicate (by replicate position) for
/// covariate-profile curves; `None` builds the baseline band.
fn lambda_band(
    fitted: &FittedCox,
    reps: &ReplicateSet,
    spec: &BandSpec,
    profile: Option<(f64, Vec<f64>)>,
) -> Result<ConfidenceBand, Error> {
    validate_spec(spec)?;
    let grid = band_grid(&fitted.baseline, spec.interval)?;
    let m = grid.len();

    let estimate: Vec<f64> = match &profile {
        Some((f_hat, _)) => grid.iter().map(|&t| fitted.baseline.eval(t) * f_hat).collect(),
        None => grid.iter().map(|&t| fitted.baseline.eval(t)).collect(),
    };
    let factors = profile.as_ref().map(|(_, f)| f.as_slice());
    let (values, rows) = converged_values(&reps.replicates, &grid, factors);
    let sigma2 = sigma2_from_values(&values, rows, m, reps.n);

    // The critical value always lives on the identity scale; the log
    // transform only reshapes the edges.
    let id_spec = BandSpec {
        transform: Transform::Identity,
        ..*spec
    };
    let g_id =
        weight_values(&id_spec, &sigma2, &estimate, reps.n).map_err(|e| remap_grid_error(e, &grid))?;
    let g_edge = match spec.transform {
        Transform::Identity => g_id.clone(),
        Transform::Log => {
            weight_values(spec, &sigma2, &estimate, reps.n).map_err(|e| remap_grid_error(e, &grid))?
        }
    };

    let sqrt_n = (reps.n as f64).sqrt();
    let normalized: Vec<f64> = g_id.iter().map(|v| v / sqrt_n).collect();
    let sups: Vec<f64> = (0..rows)
        .map(|b| sup_from_values(&values[b * m..(b + 1) * m], &estimate, &normalized, sqrt_n))
        .collect();
    let c_star = critical_value(&sups, spec.alpha)?;

    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut pointwise_lower = Vec::with_capacity(m);
    let mut pointwise_upper = Vec::with_capacity(m);
    let mut devs = vec![0.0; rows];
    for j in 0..m {
        for b in 0..rows {
            devs[b] = (values[b * m + j] - estimate[j]).abs();
        }
        let q = critical_value(&devs, spec.alpha)?;
        match spec.transform {
            Transform::Identity => {
                lower.push((estimate[j] - c_star / g_edge[j]).max(0.0));
                upper.push(estimate[j] + c_star / g_edge[j]);
                pointwise_lower.push((estimate[j] - q).max(0.0));
                pointwise_upper.push(estimate[j] + q);
            }
            Transform::Log => {
                lower.push(estimate[j] * (-c_star / g_edge[j]).exp());
                upper.push(estimate[j] * (c_star / g_edge[j]).exp());
                pointwise_lower.push(estimate[j] * (-q / estimate[j]).exp());
                pointwise_upper.push(estimate[j] * (q / estimate[j]).exp());
            }
        }
    }

    Ok(ConfidenceBand {
        grid,
        estimate,
        lower,
        upper,
        pointwise_lower,
        pointwise_upper,
        c_star,
        b_used: rows,
        spec: *spec,
    })
}

/// Builds the simultaneous (and pointwise) confidence band for the baseline
/// cumulative hazard over `spec.interval`.
pub fn build_band(
    fitted: &FittedCox,
    reps: &ReplicateSet,
    spec: &BandSpec,
) -> Result<ConfidenceBand, Error> {
    lambda_band(fitted, reps, spec, None)
}

/// Builds the survival-curve band for the covariate profile `x`: the
/// cumulative-hazard band for `Λ̂(t) e^{x'β̂}` (each replicate scaled by its
/// own `e^{x'β*}`) mapped through `S = exp(−Λ)`, which swaps the roles of
/// the edges.
pub fn survival_band(
    fitted: &FittedCox,
    reps: &ReplicateSet,
    x: &Array1<f64>,
    spec: &BandSpec,
) -> Result<ConfidenceBand, Error> {
    if x.len() != fitted.beta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: fitted.beta_hat.len(),
            got: x.len(),
        });
    }
    let f_hat = x.dot(&fitted.beta_hat).exp();
    let factors: Vec<f64> = reps
        .replicates
        .iter()
        .map(|r| x.dot(&r.beta_star).exp())
        .collect();
    let lam = lambda_band(fitted, reps, spec, Some((f_hat, factors)))?;

    let map = |v: &[f64]| -> Vec<f64> { v.iter().map(|&u| (-u).exp()).collect() };
    Ok(ConfidenceBand {
        estimate: map(&lam.estimate),
        lower: map(&lam.upper),
        upper: map(&lam.lower),
        pointwise_lower: map(&lam.pointwise_upper),
        pointwise_upper: map(&lam.pointwise_lower),
        grid: lam.grid,
        c_star: lam.c_star,
        b_used: lam.b_used,
        spec: lam.spec,
    })
}

/// Restricted residual mean: `∫₀^τ exp(−Λ(s)) ds`, integrated exactly over
/// the step function's segments. A horizon at or below zero gives 0; with no
/// jumps before `τ` the integrand is 1 and the value is `τ`.
pub fn rrm(lambda: &StepFunction, tau: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut cum = 0.0;
    let mut surv = 1.0;
    for (&t, &j) in lambda.times().iter().zip(lambda.jumps()) {
        if t >= tau {
            break;
        }
        acc += (t - prev) * surv;
        cum += j;
        surv = (-cum).exp();
        prev = t;
    }
    acc + (tau - prev).max(0.0) * surv
}

fn profile_rrm(fitted: &FittedCox, x: &Array1<f64>, tau: f64) -> f64 {
    rrm(&fitted.baseline.scaled(x.dot(&fitted.beta_hat).exp()), tau)
}

fn replicate_rrm(rep: &BootstrapReplicate, x: &Array1<f64>, tau: f64) -> f64 {
    rrm(&rep.baseline_star.scaled(x.dot(&rep.beta_star).exp()), tau)
}

fn check_profile(fitted: &FittedCox, x: &Array1<f64>, tau: f64) -> Result<(), Error> {
    if x.len() != fitted.beta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: fitted.beta_hat.len(),
            got: x.len(),
        });
    }
    if !tau.is_finite() || !(tau > 0.0) {
        return Err(Error::config(format!("rrm horizon must be positive, got {tau}")));
    }
    Ok(())
}

/// Bootstrap confidence interval for the restricted residual mean of the
/// covariate profile `x` up to horizon `tau`, clipped to the feasible range
/// `[0, τ]`.
pub fn rrm_ci(
    fitted: &FittedCox,
    reps: &ReplicateSet,
    x: &Array1<f64>,
    tau: f64,
    alpha: f64,
) -> Result<RrmInterval, Error> {
    check_profile(fitted, x, tau)?;
    let estimate = profile_rrm(fitted, x, tau);
    let devs: Vec<f64> = reps
        .replicates
        .iter()
        .filter(|r| r.converged)
        .map(|r| (replicate_rrm(r, x, tau) - estimate).abs())
        .collect();
    let q = critical_value(&devs, alpha)?;
    Ok(RrmInterval {
        estimate,
        lower: (estimate - q).max(0.0),
        upper: (estimate + q).min(tau),
    })
}

/// Bootstrap confidence interval for the difference of restricted residual
/// means between profiles `x` and `y` (unclipped: differences may take
/// either sign).
pub fn rrm_diff_ci(
    fitted: &FittedCox,
    reps: &ReplicateSet,
    x: &Array1<f64>,
    y: &Array1<f64>,
    tau: f64,
    alpha: f64,
) -> Result<RrmInterval, Error> {
    check_profile(fitted, x, tau)?;
    check_profile(fitted, y, tau)?;
    let estimate = profile_rrm(fitted, x, tau) - profile_rrm(fitted, y, tau);
    let devs: Vec<f64> = reps
        .replicates
        .iter()
        .filter(|r| r.converged)
        .map(|r| (replicate_rrm(r, x, tau) - replicate_rrm(r, y, tau) - estimate).abs())
        .collect();
    let q = critical_value(&devs, alpha)?;
    Ok(RrmInterval {
        estimate,
        lower: estimate - q,
        upper: estimate + q,
    })
}
