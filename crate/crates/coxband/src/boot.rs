//! Wild-multiplier bootstrap for the fitted model: per-subject multiplier
//! draws, the direct (one-step) and estimating-equation replicate maps with
//! observed or residual increments, and the seed-addressed driver that
//! produces a full replicate set with pointwise variance estimates.

use crate::cox::{
    sweep_events, validate_options, FitOptions, FittedCox, NewtonFailure, WeightedSystem,
};
use crate::data::SurvivalDataset;
use crate::error::Error;
use crate::linalg;
use crate::par::par_map_indexed;
use crate::rng::substream;
use crate::step::StepFunction;
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::Serialize;

/// Law of the mean-zero, unit-variance multipliers. `Zero` is a degenerate
/// diagnostic hook: every draw is 0, so every replicate collapses onto the
/// fitted estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MultiplierKind {
    /// Standard normal draws.
    Normal,
    /// Centered unit Poisson: `P − 1`.
    Poisson,
    /// Centered unit exponential: `E − 1`.
    Exponential,
    /// Identically zero (degenerate hook for tests and calibration).
    Zero,
}

/// How a replicate estimate is produced from the multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    /// One Newton-type step from the fitted value using the multiplier score
    /// and the squared-multiplier information.
    Direct,
    /// Full re-solve of the multiplier-weighted estimating equation.
    EstimatingEquation,
}

/// Which counting-process increments the multipliers perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Increments {
    /// Observed event increments.
    Dn,
    /// Estimated martingale-residual increments, frozen at the fitted value.
    Dmhat,
}

/// Bootstrap settings: scheme, increments, multiplier law, replicate count,
/// seed, and the Newton options used by estimating-equation re-solves.
#[derive(Debug, Clone, Serialize)]
pub struct BootConfig {
    pub scheme: Scheme,
    pub increments: Increments,
    pub multiplier: MultiplierKind,
    /// Number of replicates.
    pub b: usize,
    pub seed: u64,
    pub fit_options: FitOptions,
}

/// One bootstrap replicate: the perturbed estimate, its baseline curve, the
/// multipliers that produced it, and whether the replicate solve succeeded.
/// Failed replicates carry the fitted values as placeholders and are skipped
/// by every downstream aggregate.
#[derive(Debug, Clone)]
pub struct BootstrapReplicate {
    pub beta_star: Array1<f64>,
    pub baseline_star: StepFunction,
    pub multipliers: Vec<f64>,
    pub converged: bool,
}

/// A complete bootstrap run: all replicates in draw order plus the pointwise
/// variance estimates of the baseline deviation process on the request grid.
#[derive(Debug, Clone)]
pub struct ReplicateSet {
    pub replicates: Vec<BootstrapReplicate>,
    /// Number of subjects in the original dataset.
    pub n: usize,
    /// Evaluation grid the variances refer to.
    pub grid: Vec<f64>,
    /// `n ×` sample variance of the replicate baselines at each grid point,
    /// over converged replicates.
    pub sigma2_hat: Vec<f64>,
    /// Count of replicates whose solve did not converge.
    pub n_failed: usize,
}

/// Draws `n` independent multipliers of the given law from the stream.
pub fn draw_multipliers<R: rand::Rng + ?Sized>(
    n: usize,
    kind: MultiplierKind,
    rng: &mut R,
) -> Vec<f64> {
    match kind {
        MultiplierKind::Normal => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        MultiplierKind::Poisson => {
            let pois = Poisson::new(1.0).expect("unit rate is valid");
            (0..n).map(|_| pois.sample(rng) - 1.0).collect()
        }
        MultiplierKind::Exponential => (0..n).map(|_| rng.sample::<f64, _>(Exp1) - 1.0).collect(),
        MultiplierKind::Zero => vec![0.0; n],
    }
}

/// Everything about the fitted model that replicates reuse: risk-set moments,
/// baseline jumps, and centered covariates at the event rows, all evaluated
/// once at the fitted value.
pub(crate) struct ReplicateEngine<'a> {
    ds: &'a SurvivalDataset,
    fitted: &'a FittedCox,
    /// Risk-set denominator per distinct event time.
    s0: Vec<f64>,
    /// Risk-set mean covariate per event time, flattened `K × p`.
    e: Vec<f64>,
    /// Fitted baseline jumps `d_k / S0_k`.
    dlam: Vec<f64>,
    /// Whether the event time survived the fitted baseline's skip rule.
    keep: Vec<bool>,
    /// Per event row: covariate minus the risk-set mean, flattened.
    ev_centered: Vec<f64>,
    /// Per event row: owning subject index.
    ev_subject: Vec<usize>,
    /// Per event row: dataset row index (for raw covariate access).
    ev_row: Vec<usize>,
    /// Offsets of each event time's rows into the two vectors above.
    ev_offsets: Vec<usize>,
    /// Per dataset row: risk weight `exp(x'β̂)`.
    w_row: Vec<f64>,
    /// Unweighted score targets `Σ_{events at k} x`, flattened `K × p`.
    a_fit: Vec<f64>,
}

impl<'a> ReplicateEngine<'a> {
    pub(crate) fn new(fitted: &'a FittedCox, ds: &'a SurvivalDataset) -> Result<Self, Error> {
        if fitted.beta_hat.len() != ds.p() {
            return Err(Error::DimensionMismatch {
                expected: ds.p(),
                got: fitted.beta_hat.len(),
            });
        }
        let p = ds.p();
        let k_total = ds.event_times().len();
        let beta = &fitted.beta_hat;

        let mut s0 = vec![0.0; k_total];
        let mut e = vec![0.0; k_total * p];
        sweep_events(ds, beta, |k, _, s0k, s1, _| {
            s0[k] = s0k;
            for j in 0..p {
                e[k * p + j] = s1[j] / s0k;
            }
        });

        let mut dlam = vec![0.0; k_total];
        let mut keep = vec![false; k_total];
        for k in 0..k_total {
            dlam[k] = ds.event_d()[k] / s0[k];
            keep[k] = s0[k] > 0.0 && dlam[k].is_finite();
        }

        let mut ev_centered = Vec::new();
        let mut ev_subject = Vec::new();
        let mut ev_row = Vec::new();
        let mut ev_offsets = vec![0usize];
        let mut a_fit = vec![0.0; k_total * p];
        for k in 0..k_total {
            for &r in ds.event_rows_at(k) {
                let x = &ds.rows()[r].covariates;
                for j in 0..p {
                    ev_centered.push(x[j] - e[k * p + j]);
                    a_fit[k * p + j] += x[j];
                }
                ev_subject.push(ds.subject_of_row(r));
                ev_row.push(r);
            }
            ev_offsets.push(ev_subject.len());
        }

        let w_row = ds
            .rows()
            .iter()
            .map(|row| {
                row.covariates
                    .iter()
                    .zip(beta.iter())
                    .map(|(x, b)| x * b)
                    .sum::<f64>()
                    .exp()
            })
            .collect();

        Ok(ReplicateEngine {
            ds,
            fitted,
            s0,
            e,
            dlam,
            keep,
            ev_centered,
            ev_subject,
            ev_row,
            ev_offsets,
            w_row,
            a_fit,
        })
    }

    fn failed(&self, g: &[f64]) -> BootstrapReplicate {
        BootstrapReplicate {
            beta_star: self.fitted.beta_hat.clone(),
            baseline_star: self.fitted.baseline.clone(),
            multipliers: g.to_vec(),
            converged: false,
        }
    }

    /// Multiplier-weighted risk-set moments at the fitted value:
    /// `g0_k = Σ_{at risk} G_i w_r` and `g1_k = Σ_{at risk} G_i w_r x_r`,
    /// by one descending add/remove sweep over the cached row weights.
    fn g_risk_moments(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.ds.p();
        let rows = self.ds.rows();
        let times = self.ds.event_times();
        let stop_order = self.ds.by_stop_desc();
        let start_order = self.ds.by_start_desc();
        let k_total = times.len();

        let mut g0 = vec![0.0; k_total];
        let mut g1 = vec![0.0; k_total * p];
        let mut acc0 = 0.0;
        let mut acc1 = vec![0.0; p];
        let update = |r: usize, sign: f64, acc0: &mut f64, acc1: &mut [f64]| {
            let gw = sign * g[self.ds.subject_of_row(r)] * self.w_row[r];
            *acc0 += gw;
            for (a, x) in acc1.iter_mut().zip(&rows[r].covariates) {
                *a += gw * x;
            }
        };

        let mut add = 0usize;
        let mut rem = 0usize;
        for k in (0..k_total).rev() {
            let t = times[k];
            while add < rows.len() && rows[stop_order[add]].stop >= t {
                update(stop_order[add], 1.0, &mut acc0, &mut acc1);
                add += 1;
            }
            while rem < rows.len() && rows[start_order[rem]].start >= t {
                update(start_order[rem], -1.0, &mut acc0, &mut acc1);
                rem += 1;
            }
            g0[k] = acc0;
            g1[k * p..(k + 1) * p].copy_from_slice(&acc1);
        }
        (g0, g1)
    }

    /// Sum of the multipliers over the event rows at each event time.
    fn g_event_sums(&self, g: &[f64]) -> Vec<f64> {
        (0..self.dlam.len())
            .map(|k| {
                self.ev_subject[self.ev_offsets[k]..self.ev_offsets[k + 1]]
                    .iter()
                    .map(|&s| g[s])
                    .sum()
            })
            .collect()
    }

    /// Direct-scheme replicate: one step `β* = β̂ + I*⁻¹ U*` with the
    /// multiplier score `U*` and squared-multiplier information `I*`, then
    /// the perturbed baseline jumps with their drift correction.
    pub(crate) fn direct(&self, g: &[f64], increments: Increments) -> BootstrapReplicate {
        let p = self.ds.p();
        let k_total = self.dlam.len();

        // Score and information over the event rows.
        let mut u = vec![0.0; p];
        let mut i_star = Array2::<f64>::zeros((p, p));
        for (row_idx, &subj) in self.ev_subject.iter().enumerate() {
            let gi = g[subj];
            let c = &self.ev_centered[row_idx * p..(row_idx + 1) * p];
            for j in 0..p {
                u[j] += gi * c[j];
                for l in 0..p {
                    i_star[[j, l]] += gi * gi * c[j] * c[l];
                }
            }
        }

        // Residual increments replace the raw event increments in the score
        // by subtracting the compensator part, aggregated per event time.
        let risk = if increments == Increments::Dmhat {
            let (g0, g1) = self.g_risk_moments(g);
            for k in 0..k_total {
                for j in 0..p {
                    u[j] -= self.dlam[k] * (g1[k * p + j] - g0[k] * self.e[k * p + j]);
                }
            }
            Some(g0)
        } else {
            None
        };

        let delta = if u.iter().all(|&v| v == 0.0) {
            // Degenerate multipliers: the replicate sits exactly on the fit.
            Array1::zeros(p)
        } else {
            match linalg::solve(&i_star, &Array1::from_vec(u)) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => return self.failed(g),
            }
        };
        let beta_star = &self.fitted.beta_hat + &delta;
        if beta_star.iter().any(|v| !v.is_finite()) {
            return self.failed(g);
        }

        let ge = self.g_event_sums(g);
        let mut times = Vec::with_capacity(k_total);
        let mut jumps = Vec::with_capacity(k_total);
        for k in 0..k_total {
            if !self.keep[k] {
                continue;
            }
            let corr = match &risk {
                Some(g0) => (ge[k] - g0[k] * self.dlam[k]) / self.s0[k],
                None => ge[k] / self.s0[k],
            };
            let de: f64 = (0..p).map(|j| delta[j] * self.e[k * p + j]).sum();
            let jump = self.dlam[k] - de * self.dlam[k] + corr;
            if !jump.is_finite() {
                return self.failed(g);
            }
            times.push(self.ds.event_times()[k]);
            jumps.push(jump);
        }
        let baseline_star =
            StepFunction::new(times, jumps).expect("event times are strictly increasing");
        BootstrapReplicate {
            beta_star,
            baseline_star,
            multipliers: g.to_vec(),
            converged: true,
        }
    }

    /// Per-event targets and masses of the multiplier-weighted estimating
    /// equation. With observed increments the weight of an event row is
    /// `G_i + 1`; with residual increments the `G dM̂` part is folded in
    /// through the cached risk moments.
    fn ee_system(&self, g: &[f64], increments: Increments) -> WeightedSystem<'a> {
        let p = self.ds.p();
        let k_total = self.dlam.len();
        let mut a = vec![0.0; k_total * p];
        let mut w = vec![0.0; k_total];
        match increments {
            Increments::Dn => {
                for k in 0..k_total {
                    for row_idx in self.ev_offsets[k]..self.ev_offsets[k + 1] {
                        let gi = g[self.ev_subject[row_idx]];
                        let x = &self.ds.rows()[self.ev_row[row_idx]].covariates;
                        for j in 0..p {
                            a[k * p + j] += (gi + 1.0) * x[j];
                        }
                        w[k] += gi + 1.0;
                    }
                }
            }
            Increments::Dmhat => {
                let (g0, g1) = self.g_risk_moments(g);
                let ge = self.g_event_sums(g);
                for k in 0..k_total {
                    for j in 0..p {
                        let mut acc = self.a_fit[k * p + j];
                        for row_idx in self.ev_offsets[k]..self.ev_offsets[k + 1] {
                            acc += g[self.ev_subject[row_idx]]
                                * self.ds.rows()[self.ev_row[row_idx]].covariates[j];
                        }
                        acc -= self.dlam[k] * g1[k * p + j];
                        a[k * p + j] = acc;
                    }
                    w[k] = self.ds.event_d()[k] + ge[k] - self.dlam[k] * g0[k];
                }
            }
        }
        WeightedSystem { ds: self.ds, a, w }
    }

    /// Estimating-equation replicate: re-solve the weighted system by Newton
    /// from the fitted value and attach its weighted baseline.
    pub(crate) fn ee(
        &self,
        g: &[f64],
        increments: Increments,
        opts: &FitOptions,
    ) -> BootstrapReplicate {
        let sys = self.ee_system(g, increments);
        let (beta_star, _) = match sys.newton(&self.fitted.beta_hat, opts) {
            Ok(ok) => ok,
            Err(
                NewtonFailure::Diverged { .. }
                | NewtonFailure::Singular { .. }
                | NewtonFailure::MaxIter { .. },
            ) => return self.failed(g),
        };
        let (baseline_star, _) = sys.baseline(&beta_star);
        if baseline_star.jumps().iter().any(|v| !v.is_finite()) {
            return self.failed(g);
        }
        BootstrapReplicate {
            beta_star,
            baseline_star,
            multipliers: g.to_vec(),
            converged: true,
        }
    }

    pub(crate) fn replicate(&self, g: &[f64], cfg: &BootConfig) -> BootstrapReplicate {
        match cfg.scheme {
            Scheme::Direct => self.direct(g, cfg.increments),
            Scheme::EstimatingEquation => self.ee(g, cfg.increments, &cfg.fit_options),
        }
    }
}

fn check_multipliers(ds: &SurvivalDataset, g: &[f64]) -> Result<(), Error> {
    if g.len() != ds.n_subjects() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_subjects(),
            got: g.len(),
        });
    }
    if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(format!("non-finite multiplier {bad}")));
    }
    Ok(())
}

/// Computes one direct-scheme replicate for explicitly supplied multipliers
/// (one per subject, in subject order).
pub fn direct_replicate(
    fitted: &FittedCox,
    ds: &SurvivalDataset,
    g: &[f64],
    increments: Increments,
) -> Result<BootstrapReplicate, Error> {
    check_multipliers(ds, g)?;
    let engine = ReplicateEngine::new(fitted, ds)?;
    Ok(engine.direct(g, increments))
}

/// Computes one estimating-equation replicate for explicitly supplied
/// multipliers. A non-convergent re-solve is reported through the
/// replicate's `converged` flag, not as an error.
pub fn ee_replicate(
    fitted: &FittedCox,
    ds: &SurvivalDataset,
    g: &[f64],
    increments: Increments,
    opts: &FitOptions,
) -> Result<BootstrapReplicate, Error> {
    check_multipliers(ds, g)?;
    validate_options(opts)?;
    let engine = ReplicateEngine::new(fitted, ds)?;
    Ok(engine.ee(g, increments, opts))
}

/// The residual-increment substitution system for fixed multipliers, exposed
/// so its score and baseline can be probed at arbitrary parameter values.
/// The residuals are frozen at the fitted value; only the risk-set means and
/// denominators move with the candidate parameter.
pub struct EeDmhatSystem<'a> {
    sys: WeightedSystem<'a>,
    p: usize,
}

impl EeDmhatSystem<'_> {
    /// The substituted weighted score at `beta`.
    pub fn weighted_score(&self, beta: &Array1<f64>) -> Result<Array1<f64>, Error> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: beta.len(),
            });
        }
        Ok(Array1::from_vec(self.sys.score(beta)))
    }

    /// The substituted baseline jumps at `beta`.
    pub fn baseline(&self, beta: &Array1<f64>) -> Result<StepFunction, Error> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: beta.len(),
            });
        }
        Ok(self.sys.baseline(beta).0)
    }
}

/// Builds the residual-increment substitution system for one multiplier
/// vector.
pub fn ee_dmhat_substitution<'a>(
    fitted: &'a FittedCox,
    ds: &'a SurvivalDataset,
    g: &[f64],
) -> Result<EeDmhatSystem<'a>, Error> {
    check_multipliers(ds, g)?;
    let engine = ReplicateEngine::new(fitted, ds)?;
    let sys = engine.ee_system(g, Increments::Dmhat);
    Ok(EeDmhatSystem { sys, p: ds.p() })
}

/// Largest admissible replicate count: replicate substreams must fit below
/// the per-repetition stream stride used by the simulation driver.
pub(crate) const MAX_REPLICATES: usize = 1 << 20;

pub(crate) fn validate_boot_config(cfg: &BootConfig) -> Result<(), Error> {
    if cfg.b == 0 {
        return Err(Error::config("bootstrap needs at least one replicate"));
    }
    if cfg.b >= MAX_REPLICATES {
        return Err(Error::config(format!(
            "replicate count {} exceeds the stream budget {}",
            cfg.b,
            MAX_REPLICATES - 1
        )));
    }
    validate_options(&cfg.fit_options)
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<(), Error> {
    if grid.is_empty() {
        return Err(Error::config("evaluation grid is empty"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid[0] < 0.0 {
        return Err(Error::config("grid points must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("grid points must be strictly increasing"));
    }
    Ok(())
}

/// Evaluates the converged replicates' baselines on a grid, optionally
/// scaling each replicate by its own factor (indexed by replicate position).
/// Returns the row-major value matrix and the number of rows.
pub(crate) fn converged_values(
    replicates: &[BootstrapReplicate],
    grid: &[f64],
    factors: Option<&[f64]>,
) -> (Vec<f64>, usize) {
    let m = grid.len();
    let mut values = Vec::new();
    let mut row = vec![0.0; m];
    let mut rows = 0usize;
    for (b, rep) in replicates.iter().enumerate() {
        if !rep.converged {
            continue;
        }
        rep.baseline_star.eval_grid_into(grid, &mut row);
        match factors {
            Some(f) => values.extend(row.iter().map(|v| v * f[b])),
            None => values.extend_from_slice(&row),
        }
        rows += 1;
    }
    (values, rows)
}

/// `n ×` two-pass sample variance per grid column over the replicate rows.
pub(crate) fn sigma2_from_values(values: &[f64], rows: usize, m: usize, n: usize) -> Vec<f64> {
    let mut sigma2 = vec![0.0; m];
    if rows < 2 {
        return sigma2;
    }
    for j in 0..m {
        let mut mean = 0.0;
        for b in 0..rows {
            mean += values[b * m + j];
        }
        mean /= rows as f64;
        let mut ss = 0.0;
        for b in 0..rows {
            let d = values[b * m + j] - mean;
            ss += d * d;
        }
        sigma2[j] = n as f64 * ss / (rows - 1) as f64;
    }
    sigma2
}

pub(crate) fn run_bootstrap_with_base(
    fitted: &FittedCox,
    ds: &SurvivalDataset,
    cfg: &BootConfig,
    grid: &[f64],
    stream_base: u64,
) -> Result<ReplicateSet, Error> {
    validate_boot_config(cfg)?;
    validate_grid(grid)?;
    let engine = ReplicateEngine::new(fitted, ds)?;
    let n_subjects = ds.n_subjects();

    let replicates = par_map_indexed(cfg.b, |b| {
        let mut rng = substream(cfg.seed, stream_base + 1 + b as u64);
        let g = draw_multipliers(n_subjects, cfg.multiplier, &mut rng);
        engine.replicate(&g, cfg)
    });

    let n_failed = replicates.iter().filter(|r| !r.converged).count();
    if n_failed == replicates.len() {
        return Err(Error::NoConvergedReplicates);
    }
    let (values, rows) = converged_values(&replicates, grid, None);
    let sigma2_hat = sigma2_from_values(&values, rows, grid.len(), n_subjects);

    Ok(ReplicateSet {
        replicates,
        n: n_subjects,
        grid: grid.to_vec(),
        sigma2_hat,
        n_failed,
    })
}

/// Runs the full bootstrap: replicate `b` draws its multipliers from
/// substream `seed ⊕ (b + 1)` (stream 0 is reserved for callers), computes
/// the configured replicate map, and the set's variance estimates are taken
/// over converged replicates on `grid`. Deterministic for a given seed,
/// independent of thread count.
pub fn run_bootstrap(
    fitted: &FittedCox,
    ds: &SurvivalDataset,
    cfg: &BootConfig,
    grid: &[f64],
) -> Result<ReplicateSet, Error> {
    run_bootstrap_with_base(fitted, ds, cfg, grid, 0)
}
