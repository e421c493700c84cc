//! Shared fixtures and independent oracle implementations for the integration tests.
//!
//! Everything in here is written as straight-line transcription of the defining
//! formulas (naive loops over rows and event times, bisection, quadrature), on
//! purpose sharing no code with the library internals, so that agreement between
//! the two is evidence rather than tautology.

#![allow(dead_code)]

use coxband::{
    fit, FitOptions, FittedCox, SurvivalDataset, SurvivalRow, StepFunction,
};
use ndarray::{Array1, Array2};
use rand::Rng;

/// Three subjects, covariates x = (1, 0, 1), one event each at t = 1, 2, 3.
/// Small enough that every downstream quantity has a closed form.
pub fn ds_three() -> SurvivalDataset {
    coxband::validate_dataset(vec![
        SurvivalRow::new("s1", 0.0, 1.0, true, vec![1.0]),
        SurvivalRow::new("s2", 0.0, 2.0, true, vec![0.0]),
        SurvivalRow::new("s3", 0.0, 3.0, true, vec![1.0]),
    ])
    .expect("fixture is valid")
}

/// Same risk structure as `ds_three` but with all covariates zero, so the
/// Breslow estimator must reduce to Nelson–Aalen.
pub fn ds_three_zero_cov() -> SurvivalDataset {
    coxband::validate_dataset(vec![
        SurvivalRow::new("s1", 0.0, 1.0, true, vec![0.0]),
        SurvivalRow::new("s2", 0.0, 2.0, true, vec![0.0]),
        SurvivalRow::new("s3", 0.0, 3.0, true, vec![0.0]),
    ])
    .expect("fixture is valid")
}

/// Two subjects whose event order separates the covariate: the partial
/// likelihood is monotone in beta and the estimate diverges.
pub fn ds_separable() -> SurvivalDataset {
    coxband::validate_dataset(vec![
        SurvivalRow::new("a", 0.0, 1.0, true, vec![1.0]),
        SurvivalRow::new("b", 0.0, 2.0, true, vec![0.0]),
    ])
    .expect("fixture is valid")
}

/// A counting-process style dataset where one subject contributes two rows
/// (multiplier weights must attach to the subject, not the row).
pub fn ds_multirow() -> SurvivalDataset {
    coxband::validate_dataset(vec![
        SurvivalRow::new("s1", 0.0, 1.0, false, vec![0.5]),
        SurvivalRow::new("s1", 1.0, 2.0, true, vec![0.5]),
        SurvivalRow::new("s2", 0.0, 1.5, true, vec![-0.4]),
        SurvivalRow::new("s3", 0.0, 3.0, true, vec![1.1]),
        SurvivalRow::new("s4", 0.5, 2.5, false, vec![0.0]),
    ])
    .expect("fixture is valid")
}

/// Random right-censored (optionally left-truncated) dataset with ties, at
/// least one event guaranteed, one row per subject.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, p: usize, truncation: bool) -> SurvivalDataset {
    loop {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let start = if truncation && rng.random::<f64>() < 0.3 {
                rng.random_range(0.0..0.5)
            } else {
                0.0
            };
            // Snap durations to a coarse grid so tied event times actually occur.
            let dur = 0.25 * rng.random_range(1..=10) as f64;
            let status = rng.random::<f64>() < 0.7;
            let covariates = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            rows.push(SurvivalRow::new(
                format!("s{i}"),
                start,
                start + dur,
                status,
                covariates,
            ));
        }
        let any_event = rows.iter().any(|r| r.status);
        if !any_event {
            continue;
        }
        return coxband::validate_dataset(rows).expect("generated rows are valid");
    }
}

pub fn random_beta<R: Rng>(rng: &mut R, p: usize) -> Array1<f64> {
    Array1::from_iter((0..p).map(|_| rng.random_range(-0.5..0.5)))
}

pub fn at_risk(row: &SurvivalRow, t: f64) -> bool {
    row.start < t && t <= row.stop
}

fn xdot(row: &SurvivalRow, beta: &Array1<f64>) -> f64 {
    row.covariates
        .iter()
        .zip(beta.iter())
        .map(|(x, b)| x * b)
        .sum()
}

/// Risk-set moments S0, S1, S2 at (beta, t) by a direct loop over rows.
pub fn naive_moments(ds: &SurvivalDataset, beta: &Array1<f64>, t: f64) -> (f64, Array1<f64>, Array2<f64>) {
    let p = ds.p();
    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(p);
    let mut s2 = Array2::<f64>::zeros((p, p));
    for row in ds.rows() {
        if at_risk(row, t) {
            let w = xdot(row, beta).exp();
            s0 += w;
            for j in 0..p {
                s1[j] += w * row.covariates[j];
                for l in 0..p {
                    s2[[j, l]] += w * row.covariates[j] * row.covariates[l];
                }
            }
        }
    }
    (s0, s1, s2)
}

pub fn naive_e(ds: &SurvivalDataset, beta: &Array1<f64>, t: f64) -> Array1<f64> {
    let (s0, s1, _) = naive_moments(ds, beta, t);
    s1 / s0
}

pub fn naive_v(ds: &SurvivalDataset, beta: &Array1<f64>, t: f64) -> Array2<f64> {
    let p = ds.p();
    let (s0, s1, s2) = naive_moments(ds, beta, t);
    let e = s1 / s0;
    let mut v = s2 / s0;
    for j in 0..p {
        for l in 0..p {
            v[[j, l]] -= e[j] * e[l];
        }
    }
    v
}

/// Distinct event times, ascending, with tied-event counts.
pub fn naive_event_times(ds: &SurvivalDataset) -> Vec<(f64, usize)> {
    let mut times: Vec<f64> = ds
        .rows()
        .iter()
        .filter(|r| r.status)
        .map(|r| r.stop)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            let d = ds
                .rows()
                .iter()
                .filter(|r| r.status && r.stop == t)
                .count();
            (t, d)
        })
        .collect()
}

pub fn naive_loglik(ds: &SurvivalDataset, beta: &Array1<f64>) -> f64 {
    let mut ll = 0.0;
    for row in ds.rows() {
        if row.status {
            let (s0, _, _) = naive_moments(ds, beta, row.stop);
            ll += xdot(row, beta) - s0.ln();
        }
    }
    ll
}

pub fn naive_score(ds: &SurvivalDataset, beta: &Array1<f64>) -> Array1<f64> {
    let mut u = Array1::<f64>::zeros(ds.p());
    for row in ds.rows() {
        if row.status {
            let e = naive_e(ds, beta, row.stop);
            for j in 0..ds.p() {
                u[j] += row.covariates[j] - e[j];
            }
        }
    }
    u
}

pub fn naive_information(ds: &SurvivalDataset, beta: &Array1<f64>) -> Array2<f64> {
    let mut i = Array2::<f64>::zeros((ds.p(), ds.p()));
    for row in ds.rows() {
        if row.status {
            i = i + naive_v(ds, beta, row.stop);
        }
    }
    i
}

/// Breslow jumps (time, d/S0) at the distinct event times.
pub fn naive_breslow(ds: &SurvivalDataset, beta: &Array1<f64>) -> Vec<(f64, f64)> {
    naive_event_times(ds)
        .into_iter()
        .map(|(t, d)| {
            let (s0, _, _) = naive_moments(ds, beta, t);
            (t, d as f64 / s0)
        })
        .collect()
}

/// Martingale residual increments dM̂ per (event time, row), direct transcription.
pub fn naive_residuals(ds: &SurvivalDataset, beta: &Array1<f64>) -> Vec<(f64, Vec<(usize, f64)>)> {
    naive_event_times(ds)
        .into_iter()
        .map(|(t, d)| {
            let (s0, _, _) = naive_moments(ds, beta, t);
            let dlam = d as f64 / s0;
            let mut entries = Vec::new();
            for (r, row) in ds.rows().iter().enumerate() {
                if at_risk(row, t) {
                    let dn = if row.status && row.stop == t { 1.0 } else { 0.0 };
                    entries.push((r, dn - xdot(row, beta).exp() * dlam));
                }
            }
            (t, entries)
        })
        .collect()
}

/// Gaussian elimination with partial pivoting for the tiny systems in oracles.
pub fn solve_small(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let p = b.len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for j in 0..p {
        for l in 0..p {
            m[j][l] = a[[j, l]];
        }
        m[j][p] = b[j];
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &k| m[i][col].abs().total_cmp(&m[k][col].abs()))
            .unwrap();
        m.swap(col, piv);
        assert!(m[col][col].abs() > 1e-300, "oracle solve hit a singular matrix");
        for rr in col + 1..p {
            let f = m[rr][col] / m[col][col];
            for cc in col..=p {
                m[rr][cc] -= f * m[col][cc];
            }
        }
    }
    let mut x = Array1::<f64>::zeros(p);
    for col in (0..p).rev() {
        let mut acc = m[col][p];
        for cc in col + 1..p {
            acc -= m[col][cc] * x[cc];
        }
        x[col] = acc / m[col][col];
    }
    x
}

/// Direct-scheme replicate, transcribed term by term from the defining display:
/// multiplier-weighted score and squared-multiplier information at beta_hat,
/// one Newton-type update, then the perturbed baseline with its drift term.
/// Returns (beta_star, jump times, jump sizes).
pub fn naive_direct_replicate(
    ds: &SurvivalDataset,
    fitted: &FittedCox,
    g: &[f64],
    dmhat: bool,
) -> (Array1<f64>, Vec<f64>, Vec<f64>) {
    let beta = &fitted.beta_hat;
    let p = ds.p();
    let events = naive_event_times(ds);
    let resid = naive_residuals(ds, beta);

    let mut u_star = Array1::<f64>::zeros(p);
    let mut i_star = Array2::<f64>::zeros((p, p));
    for (k, &(t, _)) in events.iter().enumerate() {
        let e = naive_e(ds, beta, t);
        for (r, row) in ds.rows().iter().enumerate() {
            let gi = g[ds.subject_of_row(r)];
            // Score: G dN in the plain variant, G dM̂ in the dmhat variant.
            if dmhat {
                if at_risk(row, t) {
                    let dm = resid[k]
                        .1
                        .iter()
                        .find(|(rr, _)| *rr == r)
                        .map(|(_, v)| *v)
                        .unwrap();
                    for j in 0..p {
                        u_star[j] += gi * dm * (row.covariates[j] - e[j]);
                    }
                }
            } else if row.status && row.stop == t {
                for j in 0..p {
                    u_star[j] += gi * (row.covariates[j] - e[j]);
                }
            }
            // Information: always G² dN, in both variants.
            if row.status && row.stop == t {
                for j in 0..p {
                    for l in 0..p {
                        i_star[[j, l]] +=
                            gi * gi * (row.covariates[j] - e[j]) * (row.covariates[l] - e[l]);
                    }
                }
            }
        }
    }
    let delta = if u_star.iter().all(|&v| v == 0.0) {
        Array1::zeros(p)
    } else {
        solve_small(&i_star, &u_star)
    };
    let beta_star = beta + &delta;

    let mut times = Vec::new();
    let mut jumps = Vec::new();
    for (k, &(t, d)) in events.iter().enumerate() {
        let (s0, _, _) = naive_moments(ds, beta, t);
        let e = naive_e(ds, beta, t);
        let dlam = d as f64 / s0;
        let mut corr = 0.0;
        if dmhat {
            for &(r, dm) in &resid[k].1 {
                corr += g[ds.subject_of_row(r)] * dm / s0;
            }
        } else {
            for (r, row) in ds.rows().iter().enumerate() {
                if row.status && row.stop == t {
                    corr += g[ds.subject_of_row(r)] / s0;
                }
            }
        }
        times.push(t);
        jumps.push(dlam - delta.dot(&e) * dlam + corr);
    }
    (beta_star, times, jumps)
}

/// Weighted estimating-equation score: sum over event rows of w_subject (x − E(t,beta));
/// the weight convention (G+1 or G) is chosen by the caller.
pub fn naive_weighted_score(ds: &SurvivalDataset, beta: &Array1<f64>, w: &[f64]) -> Array1<f64> {
    let mut u = Array1::<f64>::zeros(ds.p());
    for (r, row) in ds.rows().iter().enumerate() {
        if row.status {
            let e = naive_e(ds, beta, row.stop);
            let wi = w[ds.subject_of_row(r)];
            for j in 0..ds.p() {
                u[j] += wi * (row.covariates[j] - e[j]);
            }
        }
    }
    u
}

/// Weighted Breslow-form baseline jumps for the estimating-equation scheme.
pub fn naive_weighted_baseline(ds: &SurvivalDataset, beta: &Array1<f64>, w: &[f64]) -> Vec<(f64, f64)> {
    naive_event_times(ds)
        .into_iter()
        .map(|(t, _)| {
            let (s0, _, _) = naive_moments(ds, beta, t);
            let mut num = 0.0;
            for (r, row) in ds.rows().iter().enumerate() {
                if row.status && row.stop == t {
                    num += w[ds.subject_of_row(r)];
                }
            }
            (t, num / s0)
        })
        .collect()
}

/// dmhat-substituted estimating-equation score at candidate beta: the dN + G dM̂
/// increments use residuals frozen at beta_hat while E uses the candidate.
pub fn naive_dmhat_score(
    ds: &SurvivalDataset,
    beta_hat: &Array1<f64>,
    beta: &Array1<f64>,
    g: &[f64],
) -> Array1<f64> {
    let p = ds.p();
    let resid = naive_residuals(ds, beta_hat);
    let mut u = Array1::<f64>::zeros(p);
    for (t, entries) in &resid {
        let e = naive_e(ds, beta, *t);
        for row in ds.rows() {
            if row.status && row.stop == *t {
                for j in 0..p {
                    u[j] += row.covariates[j] - e[j];
                }
            }
        }
        for &(r, dm) in entries {
            let row = &ds.rows()[r];
            let gi = g[ds.subject_of_row(r)];
            for j in 0..p {
                u[j] += gi * dm * (row.covariates[j] - e[j]);
            }
        }
    }
    u
}

/// dmhat-substituted baseline jumps at candidate beta.
pub fn naive_dmhat_baseline(
    ds: &SurvivalDataset,
    beta_hat: &Array1<f64>,
    beta: &Array1<f64>,
    g: &[f64],
) -> Vec<(f64, f64)> {
    let resid = naive_residuals(ds, beta_hat);
    resid
        .iter()
        .map(|(t, entries)| {
            let (s0, _, _) = naive_moments(ds, beta, *t);
            let d = ds
                .rows()
                .iter()
                .filter(|row| row.status && row.stop == *t)
                .count() as f64;
            let mut num = d;
            for &(r, dm) in entries {
                num += g[ds.subject_of_row(r)] * dm;
            }
            (*t, num / s0)
        })
        .collect()
}

/// Scalar bisection to tolerance `tol` on a bracketing interval.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    assert!(
        flo * fhi < 0.0,
        "bisection bracket does not straddle a root: f({lo})={flo}, f({hi})={fhi}"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest eigenvalue of a small symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen_min(m: &Array2<f64>) -> f64 {
    let p = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for j in 0..p {
            for l in j + 1..p {
                off += a[[j, l]] * a[[j, l]];
            }
        }
        if off < 1e-30 {
            break;
        }
        for j in 0..p {
            for l in j + 1..p {
                if a[[j, l]].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[[l, l]] - a[[j, j]]) / a[[j, l]];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let ajk = a[[j, k]];
                    let alk = a[[l, k]];
                    a[[j, k]] = c * ajk - s * alk;
                    a[[l, k]] = s * ajk + c * alk;
                }
                for k in 0..p {
                    let akj = a[[k, j]];
                    let akl = a[[k, l]];
                    a[[k, j]] = c * akj - s * akl;
                    a[[k, l]] = s * akj + c * akl;
                }
            }
        }
    }
    (0..p).map(|j| a[[j, j]]).fold(f64::INFINITY, f64::min)
}

/// Trapezoid quadrature of ∫_0^tau exp(-Λ(s)) ds as an independent check of the
/// exact segment-sum evaluation.
pub fn quad_rrm(lambda: &StepFunction, tau: f64, h: f64) -> f64 {
    let steps = (tau / h).ceil() as usize;
    let dt = tau / steps as f64;
    let mut acc = 0.0;
    for k in 0..steps {
        let a = (-lambda.eval(k as f64 * dt)).exp();
        let b = (-lambda.eval((k + 1) as f64 * dt)).exp();
        acc += 0.5 * (a + b) * dt;
    }
    acc
}

/// Finite-difference sweep used by the derivative acceptance criterion:
/// max relative error of the analytic score against a central-difference
/// gradient of the log partial likelihood, and of the analytic information
/// against the negative Jacobian of the score, over `n_sets` random datasets.
pub fn run_fd_suite(n_sets: usize) -> (f64, f64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    let mut worst_grad = 0.0_f64;
    let mut worst_jac = 0.0_f64;
    for set in 0..n_sets {
        let n = 5 + (set % 26);
        let p = 1 + (set % 3);
        let ds = random_dataset(&mut rng, n, p, set % 2 == 0);
        let beta = random_beta(&mut rng, p);

        let u = coxband::score(&ds, &beta).unwrap();
        let info = coxband::information(&ds, &beta).unwrap();
        let scale_u = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let scale_i = info.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

        for j in 0..p {
            let h = 1e-4 * beta[j].abs().max(1.0);
            let mut bp = beta.clone();
            let mut bm = beta.clone();
            bp[j] += h;
            bm[j] -= h;
            let fd = (coxband::log_partial_likelihood(&ds, &bp).unwrap()
                - coxband::log_partial_likelihood(&ds, &bm).unwrap())
                / (2.0 * h);
            worst_grad = worst_grad.max((fd - u[j]).abs() / scale_u);

            let up = coxband::score(&ds, &bp).unwrap();
            let um = coxband::score(&ds, &bm).unwrap();
            for l in 0..p {
                let fd_jac = (up[l] - um[l]) / (2.0 * h);
                worst_jac = worst_jac.max((fd_jac + info[[j, l]]).abs() / scale_i);
            }
        }
    }
    (worst_grad, worst_jac)
}

/// Fit with tolerances tight enough that identities limited by ‖U(β̂)‖ can be
/// asserted at 1e-12.
pub fn tight_fit(ds: &SurvivalDataset) -> FittedCox {
    let opts = FitOptions {
        score_tol: 1e-13,
        max_iter: 100,
        ..FitOptions::default()
    };
    fit(ds, &opts).expect("tight fit converges")
}

pub fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
