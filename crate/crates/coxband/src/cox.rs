//! Proportional-hazards fitting on counting-process data: risk-set moments,
//! the partial-likelihood score machinery, Newton's method with step halving,
//! the baseline cumulative-hazard estimator, and residual increments.

use crate::data::SurvivalDataset;
use crate::error::Error;
use crate::linalg;
use crate::step::StepFunction;
use ndarray::{Array1, Array2};

/// Risk-set moments at a single time point: `S0 = Σ Y_r exp(x_r'β)` together
/// with the covariate-weighted first and second moment sums.
#[derive(Debug, Clone)]
pub struct Moments {
    pub s0: f64,
    pub s1: Array1<f64>,
    pub s2: Array2<f64>,
}

/// Tuning knobs for the Newton solves.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitOptions {
    /// Convergence threshold on the sup norm of the score.
    pub score_tol: f64,
    /// Maximum Newton iterations.
    pub max_iter: usize,
    /// Parameter sup-norm beyond which the iteration is declared divergent.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            score_tol: 1e-9,
            max_iter: 50,
            divergence_bound: 50.0,
        }
    }
}

/// A converged fit: the estimate, its baseline cumulative hazard, and the
/// observed information at the solution.
#[derive(Debug, Clone)]
pub struct FittedCox {
    pub beta_hat: Array1<f64>,
    pub baseline: StepFunction,
    pub information: Array2<f64>,
    pub log_pl: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedCox {
    /// Model-based covariance of the estimate: the inverse of the observed
    /// information at the fit. `None` when the information is singular.
    pub fn covariance(&self) -> Option<Array2<f64>> {
        let p = self.information.nrows();
        let mut inv = Array2::<f64>::zeros((p, p));
        for j in 0..p {
            let mut e = Array1::<f64>::zeros(p);
            e[j] = 1.0;
            let col = crate::linalg::solve(&self.information, &e)?;
            for i in 0..p {
                inv[[i, j]] = col[i];
            }
        }
        Some(inv)
    }
}

fn check_beta(ds: &SurvivalDataset, beta: &Array1<f64>) -> Result<(), Error> {
    if beta.len() != ds.p() {
        return Err(Error::DimensionMismatch {
            expected: ds.p(),
            got: beta.len(),
        });
    }
    Ok(())
}

fn row_xb(covariates: &[f64], beta: &Array1<f64>) -> f64 {
    covariates
        .iter()
        .zip(beta.iter())
        .map(|(x, b)| x * b)
        .sum()
}

/// Risk-set moments at time `t` by a direct pass over the rows. `t` must lie
/// within `[0, tau]`; extend the horizon with
/// [`SurvivalDataset::with_tau`](crate::SurvivalDataset::with_tau) to query
/// beyond the last observed time.
pub fn s_moments(ds: &SurvivalDataset, beta: &Array1<f64>, t: f64) -> Result<Moments, Error> {
    check_beta(ds, beta)?;
    if !(0.0..=ds.tau()).contains(&t) {
        return Err(Error::QueryBeyondTau { t, tau: ds.tau() });
    }
    let p = ds.p();
    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(p);
    let mut s2 = Array2::<f64>::zeros((p, p));
    for row in ds.rows() {
        if row.start < t && t <= row.stop {
            let w = row_xb(&row.covariates, beta).exp();
            s0 += w;
            for j in 0..p {
                let wx = w * row.covariates[j];
                s1[j] += wx;
                for l in 0..p {
                    s2[[j, l]] += wx * row.covariates[l];
                }
            }
        }
    }
    Ok(Moments { s0, s1, s2 })
}

/// Sweeps the distinct event times in descending order, maintaining the
/// risk-set moment sums incrementally (each row is added once when its stop
/// time is reached and removed once its entry time is passed), and calls the
/// visitor at every event time with the current `(s0, s1, s2)`.
///
/// One full sweep is `O(n·p² + K·visitor)`; all score/likelihood/baseline
/// computations in this module are built on it.
pub(crate) fn sweep_events<F>(ds: &SurvivalDataset, beta: &Array1<f64>, mut visit: F)
where
    F: FnMut(usize, f64, f64, &[f64], &[f64]),
{
    let p = ds.p();
    let rows = ds.rows();
    let times = ds.event_times();
    let stop_order = ds.by_stop_desc();
    let start_order = ds.by_start_desc();

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let update = |r: usize, sign: f64, s0: &mut f64, s1: &mut [f64], s2: &mut [f64]| {
        let x = &rows[r].covariates;
        let w = sign * row_xb(x, beta).exp();
        *s0 += w;
        for j in 0..p {
            let wx = w * x[j];
            s1[j] += wx;
            for l in 0..p {
                s2[j * p + l] += wx * x[l];
            }
        }
    };

    let mut add = 0usize;
    let mut rem = 0usize;
    for k in (0..times.len()).rev() {
        let t = times[k];
        while add < rows.len() && rows[stop_order[add]].stop >= t {
            update(stop_order[add], 1.0, &mut s0, &mut s1, &mut s2);
            add += 1;
        }
        while rem < rows.len() && rows[start_order[rem]].start >= t {
            update(start_order[rem], -1.0, &mut s0, &mut s1, &mut s2);
            rem += 1;
        }
        visit(k, t, s0, &s1, &s2);
    }
}

/// The log partial likelihood at `beta`.
pub fn log_partial_likelihood(ds: &SurvivalDataset, beta: &Array1<f64>) -> Result<f64, Error> {
    check_beta(ds, beta)?;
    let mut ll = 0.0;
    sweep_events(ds, beta, |k, _, s0, _, _| {
        for &r in ds.event_rows_at(k) {
            ll += row_xb(&ds.rows()[r].covariates, beta);
        }
        ll -= ds.event_d()[k] * s0.ln();
    });
    Ok(ll)
}

/// The score (gradient of the log partial likelihood) at `beta`.
pub fn score(ds: &SurvivalDataset, beta: &Array1<f64>) -> Result<Array1<f64>, Error> {
    check_beta(ds, beta)?;
    let p = ds.p();
    let mut u = vec![0.0; p];
    sweep_events(ds, beta, |k, _, s0, s1, _| {
        let d = ds.event_d()[k];
        for &r in ds.event_rows_at(k) {
            for j in 0..p {
                u[j] += ds.rows()[r].covariates[j];
            }
        }
        for j in 0..p {
            u[j] -= d * s1[j] / s0;
        }
    });
    Ok(Array1::from_vec(u))
}

/// The observed information (negative score Jacobian) at `beta`: the sum of
/// the risk-set covariance matrices over event times, weighted by tie counts.
pub fn information(ds: &SurvivalDataset, beta: &Array1<f64>) -> Result<Array2<f64>, Error> {
    check_beta(ds, beta)?;
    let p = ds.p();
    let mut info = vec![0.0; p * p];
    sweep_events(ds, beta, |k, _, s0, s1, s2| {
        let d = ds.event_d()[k];
        for j in 0..p {
            for l in 0..p {
                let v = s2[j * p + l] / s0 - (s1[j] / s0) * (s1[l] / s0);
                info[j * p + l] += d * v;
            }
        }
    });
    Ok(Array2::from_shape_vec((p, p), info).expect("p x p buffer"))
}

/// Why a Newton solve stopped without converging.
pub(crate) enum NewtonFailure {
    Diverged { iterations: usize, beta_norm: f64 },
    Singular { iteration: usize },
    MaxIter { iterations: usize },
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// A multiplier-weighted estimating-equation system: per distinct event time
/// a fixed target vector `A_k` and mass `w_k`, with score
/// `Σ_k (A_k − w_k E_k(β))`, negative Jacobian `Σ_k w_k V_k(β)`, and baseline
/// jumps `w_k / S0_k(β)`. The unweighted fit is the special case
/// `A_k = Σ_{events at k} x`, `w_k = d_k`, and the bootstrap schemes only
/// differ in how the constants are assembled.
pub(crate) struct WeightedSystem<'a> {
    pub(crate) ds: &'a SurvivalDataset,
    /// Flattened `K × p` target vectors.
    pub(crate) a: Vec<f64>,
    /// Per-event masses.
    pub(crate) w: Vec<f64>,
}

impl<'a> WeightedSystem<'a> {
    /// The system whose root is the maximum partial-likelihood estimate.
    pub(crate) fn for_fit(ds: &'a SurvivalDataset) -> Self {
        let p = ds.p();
        let k_total = ds.event_times().len();
        let mut a = vec![0.0; k_total * p];
        for k in 0..k_total {
            for &r in ds.event_rows_at(k) {
                for j in 0..p {
                    a[k * p + j] += ds.rows()[r].covariates[j];
                }
            }
        }
        WeightedSystem {
            ds,
            a,
            w: ds.event_d().to_vec(),
        }
    }

    /// Score at `beta`; any non-finite entry signals numeric breakdown (for
    /// example an overflowed risk weight) and is left for the caller to test.
    pub(crate) fn score(&self, beta: &Array1<f64>) -> Vec<f64> {
        let p = self.ds.p();
        let mut u = vec![0.0; p];
        sweep_events(self.ds, beta, |k, _, s0, s1, _| {
            let wk = self.w[k];
            for j in 0..p {
                u[j] += self.a[k * p + j] - wk * s1[j] / s0;
            }
        });
        u
    }

    /// Score and negative Jacobian in one sweep.
    pub(crate) fn score_and_jacobian(&self, beta: &Array1<f64>) -> (Vec<f64>, Array2<f64>) {
        let p = self.ds.p();
        let mut u = vec![0.0; p];
        let mut jac = Array2::<f64>::zeros((p, p));
        sweep_events(self.ds, beta, |k, _, s0, s1, s2| {
            let wk = self.w[k];
            for j in 0..p {
                let e_j = s1[j] / s0;
                u[j] += self.a[k * p + j] - wk * e_j;
                for l in 0..p {
                    jac[[j, l]] += wk * (s2[j * p + l] / s0 - e_j * (s1[l] / s0));
                }
            }
        });
        (u, jac)
    }

    /// Baseline jumps `w_k / S0_k(beta)` at the event times, with the number
    /// of skipped jumps (empty or degenerate risk sets) reported alongside.
    pub(crate) fn baseline(&self, beta: &Array1<f64>) -> (StepFunction, usize) {
        let mut times = Vec::with_capacity(self.w.len());
        let mut jumps = Vec::with_capacity(self.w.len());
        let mut skipped = 0usize;
        sweep_events(self.ds, beta, |k, t, s0, _, _| {
            let j = self.w[k] / s0;
            if s0 > 0.0 && j.is_finite() {
                times.push(t);
                jumps.push(j);
            } else {
                skipped += 1;
            }
        });
        times.reverse();
        jumps.reverse();
        let f = StepFunction::new(times, jumps).expect("event times are strictly increasing");
        (f, skipped)
    }

    /// Newton's method with step halving on the score sup norm. Returns the
    /// solution and the number of accepted steps.
    pub(crate) fn newton(
        &self,
        init: &Array1<f64>,
        opts: &FitOptions,
    ) -> Result<(Array1<f64>, usize), NewtonFailure> {
        let mut beta = init.clone();
        for iter in 0..opts.max_iter {
            let (u, jac) = self.score_and_jacobian(&beta);
            let current = sup_norm(&u);
            if current <= opts.score_tol {
                confirm_interior_maximum(&beta, &u, &jac, iter)?;
                return Ok((beta, iter));
            }
            if !current.is_finite() {
                return Err(NewtonFailure::Diverged {
                    iterations: iter,
                    beta_norm: sup_norm(beta.as_slice().unwrap()),
                });
            }
            let delta = linalg::solve(&jac, &Array1::from_vec(u))
                .ok_or(NewtonFailure::Singular { iteration: iter })?;

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=10 {
                let cand = &beta + &(step * &delta);
                let u_new = self.score(&cand);
                let new = sup_norm(&u_new);
                if new.is_finite() && new < current {
                    accepted = Some(cand);
                    break;
                }
                step *= 0.5;
            }
            beta = accepted.ok_or(NewtonFailure::MaxIter { iterations: iter })?;

            let norm = sup_norm(beta.as_slice().unwrap());
            if norm > opts.divergence_bound {
                return Err(NewtonFailure::Diverged {
                    iterations: iter + 1,
                    beta_norm: norm,
                });
            }
        }
        // One last convergence check at the final iterate.
        let (u, jac) = self.score_and_jacobian(&beta);
        if sup_norm(&u) <= opts.score_tol {
            confirm_interior_maximum(&beta, &u, &jac, opts.max_iter)?;
            Ok((beta, opts.max_iter))
        } else {
            Err(NewtonFailure::MaxIter {
                iterations: opts.max_iter,
            })
        }
    }
}

/// Separation guard at a point where the score has met the tolerance.
///
/// At a well-posed interior maximum the Newton step vanishes along with the
/// score. When the likelihood is monotone (separable data), the score and
/// the information decay at the same exponential rate, so the Newton step
/// stays order-one even as the score becomes numerically zero; a tolerance
/// on the step therefore separates the two regimes cleanly. A singular
/// system here is left alone: data with no usable covariate signal is a
/// valid (flat) fit, not a divergence.
fn confirm_interior_maximum(
    beta: &Array1<f64>,
    u: &[f64],
    jac: &Array2<f64>,
    iterations: usize,
) -> Result<(), NewtonFailure> {
    const FLAT_STEP_TOL: f64 = 1e-3;
    if let Some(delta) = linalg::solve(jac, &Array1::from_vec(u.to_vec())) {
        if sup_norm(delta.as_slice().unwrap()) > FLAT_STEP_TOL {
            return Err(NewtonFailure::Diverged {
                iterations,
                beta_norm: sup_norm(beta.as_slice().unwrap()),
            });
        }
    }
    Ok(())
}

pub(crate) fn validate_options(opts: &FitOptions) -> Result<(), Error> {
    if !(opts.score_tol > 0.0) {
        return Err(Error::config("score_tol must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::config("max_iter must be at least 1"));
    }
    if !(opts.divergence_bound > 0.0) {
        return Err(Error::config("divergence_bound must be positive"));
    }
    Ok(())
}

/// Maximizes the partial likelihood by Newton's method from `beta = 0` and
/// attaches the baseline cumulative hazard and observed information at the
/// solution. A dataset without events is returned as-is with `beta = 0`.
pub fn fit(ds: &SurvivalDataset, opts: &FitOptions) -> Result<FittedCox, Error> {
    validate_options(opts)?;
    let p = ds.p();
    if ds.event_times().is_empty() {
        return Ok(FittedCox {
            beta_hat: Array1::zeros(p),
            baseline: StepFunction::empty(),
            information: Array2::zeros((p, p)),
            log_pl: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let sys = WeightedSystem::for_fit(ds);
    let (beta_hat, iterations) = sys.newton(&Array1::zeros(p), opts).map_err(|f| match f {
        NewtonFailure::Diverged {
            iterations,
            beta_norm,
        } => Error::MonotoneLikelihood {
            iterations,
            beta_norm,
        },
        NewtonFailure::Singular { iteration } => Error::SingularInformation { iteration },
        NewtonFailure::MaxIter { iterations } => Error::DidNotConverge { iterations },
    })?;

    let (baseline, _) = sys.baseline(&beta_hat);
    let log_pl = log_partial_likelihood(ds, &beta_hat)?;
    let info = information(ds, &beta_hat)?;
    Ok(FittedCox {
        beta_hat,
        baseline,
        information: info,
        log_pl,
        converged: true,
        iterations,
    })
}

/// The baseline cumulative-hazard estimator at an arbitrary `beta`: jumps
/// `d_k / S0(t_k, beta)` at the distinct event times. Returns the step
/// function together with the number of event times skipped because their
/// risk-set denominator degenerated.
pub fn breslow(ds: &SurvivalDataset, beta: &Array1<f64>) -> Result<(StepFunction, usize), Error> {
    check_beta(ds, beta)?;
    let sys = WeightedSystem::for_fit(ds);
    Ok(sys.baseline(beta))
}

/// The classical unweighted cumulative-hazard estimator (events over risk-set
/// size), the zero-covariate special case of [`breslow`].
pub fn nelson_aalen(ds: &SurvivalDataset) -> StepFunction {
    let beta = Array1::zeros(ds.p());
    let sys = WeightedSystem::for_fit(ds);
    sys.baseline(&beta).0
}

/// Martingale-residual increments per event time: for every at-risk row the
/// observed event increment minus the estimated hazard increment. Grouped by
/// event time; entries reference row indices.
#[derive(Debug, Clone)]
pub struct ResidualIncrements {
    times: Vec<f64>,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl ResidualIncrements {
    /// The distinct event times, ascending.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `(row index, increment)` pairs at the `k`-th event time.
    pub fn at(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[self.offsets[k]..self.offsets[k + 1]]
            .iter()
            .copied()
    }

    /// Sum of the increments at the `k`-th event time (zero at the fit).
    pub fn sum_at(&self, k: usize) -> f64 {
        self.at(k).map(|(_, v)| v).sum()
    }

    /// Iterates `(event time, entries)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[(usize, f64)])> + '_ {
        self.times
            .iter()
            .enumerate()
            .map(move |(k, &t)| (t, &self.entries[self.offsets[k]..self.offsets[k + 1]]))
    }
}

/// Computes the residual increments of a fitted model. The hazard increments
/// are evaluated at `fitted.beta_hat`, so the per-time sums vanish up to the
/// fit tolerance.
pub fn residual_increments(
    ds: &SurvivalDataset,
    fitted: &FittedCox,
) -> Result<ResidualIncrements, Error> {
    check_beta(ds, &fitted.beta_hat)?;
    let beta = &fitted.beta_hat;
    let times: Vec<f64> = ds.event_times().to_vec();

    // Risk-set denominators at the event times.
    let mut s0_at = vec![0.0; times.len()];
    sweep_events(ds, beta, |k, _, s0, _, _| {
        s0_at[k] = s0;
    });

    let mut offsets = vec![0usize];
    let mut entries = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let dlam = ds.event_d()[k] / s0_at[k];
        for (r, row) in ds.rows().iter().enumerate() {
            if row.start < t && t <= row.stop {
                let dn = if row.status && row.stop == t { 1.0 } else { 0.0 };
                entries.push((r, dn - row_xb(&row.covariates, beta).exp() * dlam));
            }
        }
        offsets.push(entries.len());
    }
    Ok(ResidualIncrements {
        times,
        offsets,
        entries,
    })
}
