//! Independent-transcription oracles for both bootstrap schemes: the direct
//! (one-step) replicate map, the weighted estimating-equation solve, the
//! dmhat substitution system, and the multiplier laws.

mod common;

use approx::assert_abs_diff_eq;
use common::*;
use coxband::{
    direct_replicate, draw_multipliers, ee_dmhat_substitution, ee_replicate, fit, run_bootstrap,
    substream, BootConfig, FitOptions, Increments, MultiplierKind, Scheme,
};
use ndarray::arr1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_cfg(scheme: Scheme, increments: Increments, b: usize) -> BootConfig {
    BootConfig {
        scheme,
        increments,
        multiplier: MultiplierKind::Normal,
        b,
        seed: 42,
        fit_options: FitOptions::default(),
    }
}

#[test]
fn multipliers_have_the_right_support_and_moments() {
    let n = 1_000_000;
    for kind in [
        MultiplierKind::Normal,
        MultiplierKind::Poisson,
        MultiplierKind::Exponential,
    ] {
        let mut rng = substream(7, 1);
        let g = draw_multipliers(n, kind, &mut rng);
        assert_eq!(g.len(), n);
        let mean = g.iter().sum::<f64>() / n as f64;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 6e-3, "{kind:?}: mean {mean}");
        assert!((var - 1.0).abs() < 2e-2, "{kind:?}: var {var}");
        match kind {
            MultiplierKind::Poisson => {
                for &v in g.iter().take(10_000) {
                    assert!(v >= -1.0);
                    assert!(((v + 1.0) - (v + 1.0).round()).abs() < 1e-12);
                }
            }
            MultiplierKind::Exponential => {
                assert!(g.iter().all(|&v| v > -1.0));
            }
            _ => {}
        }
    }
    let zeros = draw_multipliers(100, MultiplierKind::Zero, &mut substream(7, 1));
    assert!(zeros.iter().all(|&v| v == 0.0));
}

#[test]
fn multiplier_draws_are_stream_deterministic() {
    for kind in [
        MultiplierKind::Normal,
        MultiplierKind::Poisson,
        MultiplierKind::Exponential,
    ] {
        let a = draw_multipliers(50, kind, &mut substream(99, 3));
        let b = draw_multipliers(50, kind, &mut substream(99, 3));
        assert_eq!(a, b);
        let c = draw_multipliers(50, kind, &mut substream(99, 4));
        assert_ne!(a, c, "distinct streams should give distinct draws");
    }
}

#[test]
fn direct_replicate_matches_the_transcribed_equations() {
    let fixtures: Vec<(coxband::SurvivalDataset, Vec<f64>)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = Vec::new();
        v.push((ds_three(), vec![1.0, -1.0, 0.0]));
        v.push((ds_multirow(), vec![0.3, -0.7, 1.2, 0.4]));
        for _ in 0..4 {
            let ds = random_dataset(&mut rng, 30, 2, true);
            let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Normal, &mut rng);
            v.push((ds, g));
        }
        v
    };

    for (ds, g) in fixtures {
        let fitted = fit(&ds, &FitOptions::default()).unwrap();
        for increments in [Increments::Dn, Increments::Dmhat] {
            let rep = direct_replicate(&fitted, &ds, &g, increments).unwrap();
            assert!(rep.converged);
            let (beta_o, times_o, jumps_o) = naive_direct_replicate(&ds, &fitted, &g, increments == Increments::Dmhat);

            for j in 0..ds.p() {
                assert_abs_diff_eq!(rep.beta_star[j], beta_o[j], epsilon = 1e-11);
            }
            assert_eq!(rep.baseline_star.times(), &times_o[..]);
            for (a, b) in rep.baseline_star.jumps().iter().zip(&jumps_o) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-11);
            }
        }
    }
}

#[test]
fn replicate_baselines_jump_only_at_original_event_times() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ds = random_dataset(&mut rng, 25, 1, false);
    let fitted = fit(&ds, &FitOptions::default()).unwrap();
    let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Exponential, &mut rng);

    let d = direct_replicate(&fitted, &ds, &g, Increments::Dn).unwrap();
    assert_eq!(d.baseline_star.times(), ds.event_times());
    let e = ee_replicate(&fitted, &ds, &g, Increments::Dn, &FitOptions::default()).unwrap();
    assert_eq!(e.baseline_star.times(), ds.event_times());
}

#[test]
fn zero_multipliers_are_a_fixed_point_of_every_scheme() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for ds in [ds_three(), ds_multirow(), random_dataset(&mut rng, 20, 2, true)] {
        let fitted = fit(&ds, &FitOptions::default()).unwrap();
        let zeros = vec![0.0; ds.n_subjects()];
        for (scheme, increments) in [
            (Scheme::Direct, Increments::Dn),
            (Scheme::Direct, Increments::Dmhat),
            (Scheme::EstimatingEquation, Increments::Dn),
            (Scheme::EstimatingEquation, Increments::Dmhat),
        ] {
            let rep = match scheme {
                Scheme::Direct => direct_replicate(&fitted, &ds, &zeros, increments).unwrap(),
                Scheme::EstimatingEquation => {
                    ee_replicate(&fitted, &ds, &zeros, increments, &FitOptions::default()).unwrap()
                }
            };
            assert!(rep.converged);
            // Exact equality, not approximate: all multiplier terms vanish.
            for j in 0..ds.p() {
                assert_eq!(
                    rep.beta_star[j].to_bits(),
                    fitted.beta_hat[j].to_bits(),
                    "{scheme:?}/{increments:?}"
                );
            }
            assert_eq!(rep.baseline_star.times(), fitted.baseline.times());
            for (a, b) in rep
                .baseline_star
                .jumps()
                .iter()
                .zip(fitted.baseline.jumps())
            {
                assert_eq!(a.to_bits(), b.to_bits(), "{scheme:?}/{increments:?}");
            }
        }
    }
}

#[test]
fn ee_weight_identity_at_beta_hat() {
    // (G+1)-weighted and G-weighted scores at beta_hat differ exactly by the
    // fitted score, so with a tightly converged fit they agree to 1e-12.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let ds = random_dataset(&mut rng, 40, 2, false);
        let fitted = tight_fit(&ds);
        let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Normal, &mut rng);
        let gp1: Vec<f64> = g.iter().map(|v| v + 1.0).collect();
        let a = naive_weighted_score(&ds, &fitted.beta_hat, &gp1);
        let b = naive_weighted_score(&ds, &fitted.beta_hat, &g);
        assert!(
            max_abs_diff(&a, &b) < 1e-12,
            "identity residual {}",
            max_abs_diff(&a, &b)
        );
    }
}

#[test]
fn ee_replicate_matches_a_bisection_oracle_in_one_dimension() {
    // Fixture with G = (0, 1, 0): weights (1, 2, 1) keep the weighted score
    // monotone with a bracketable sign change.
    let ds = ds_three();
    let fitted = fit(&ds, &FitOptions::default()).unwrap();
    let g = vec![0.0, 1.0, 0.0];
    let w: Vec<f64> = g.iter().map(|v| v + 1.0).collect();
    let root = bisect(
        |b| naive_weighted_score(&ds, &arr1(&[b]), &w)[0],
        -20.0,
        5.0,
        1e-12,
    );
    let rep = ee_replicate(&fitted, &ds, &g, Increments::Dn, &FitOptions::default()).unwrap();
    assert!(rep.converged);
    assert_abs_diff_eq!(rep.beta_star[0], root, epsilon = 1e-8);

    // Baseline jumps are the weighted Breslow form at the solved beta.
    let oracle = naive_weighted_baseline(&ds, &rep.beta_star, &w);
    for ((t, j), (ot, oj)) in rep
        .baseline_star
        .times()
        .iter()
        .zip(rep.baseline_star.jumps())
        .zip(oracle)
    {
        assert_eq!(*t, ot);
        assert_abs_diff_eq!(*j, oj, epsilon = 1e-10);
    }

    // Poisson draws keep all weights nonnegative: the weighted score stays
    // monotone and bisection brackets the same root the library finds.
    let mut rng = substream(123, 9);
    let ds2 = random_dataset(&mut rng, 25, 1, false);
    let fitted2 = fit(&ds2, &FitOptions::default()).unwrap();
    let mut checked = 0;
    for draw in 0..12 {
        let g2 = draw_multipliers(ds2.n_subjects(), MultiplierKind::Poisson, &mut substream(200, draw));
        let w2: Vec<f64> = g2.iter().map(|v| v + 1.0).collect();
        let f = |b: f64| naive_weighted_score(&ds2, &arr1(&[b]), &w2)[0];
        if f(-40.0) * f(40.0) >= 0.0 {
            continue; // weighted separation: no interior root to compare
        }
        let root2 = bisect(f, -40.0, 40.0, 1e-12);
        let rep2 =
            ee_replicate(&fitted2, &ds2, &g2, Increments::Dn, &FitOptions::default()).unwrap();
        assert!(rep2.converged);
        assert_abs_diff_eq!(rep2.beta_star[0], root2, epsilon = 1e-8);
        checked += 1;
    }
    assert!(checked >= 6, "only {checked} Poisson draws were bracketable");
}

#[test]
fn ee_poisson_weighted_score_is_nonincreasing() {
    let mut rng = substream(77, 0);
    let ds = random_dataset(&mut rng, 20, 1, false);
    for draw in 0..5 {
        let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Poisson, &mut substream(78, draw));
        let w: Vec<f64> = g.iter().map(|v| v + 1.0).collect();
        let mut prev = f64::INFINITY;
        let mut b = -3.0;
        while b <= 3.0 {
            let u = naive_weighted_score(&ds, &arr1(&[b]), &w)[0];
            assert!(u <= prev + 1e-9, "weighted score increased at beta={b}");
            prev = u;
            b += 0.25;
        }
    }
}

#[test]
fn dmhat_substitution_system_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for ds in [ds_multirow(), random_dataset(&mut rng, 30, 2, false)] {
        let fitted = tight_fit(&ds);
        let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Normal, &mut rng);
        let sys = ee_dmhat_substitution(&fitted, &ds, &g).unwrap();

        // At beta_hat the dN part of the weighted score is the fitted score
        // (≈ 0), so the system reduces to sum_i G_i ∫ (X_i - E) dM̂_i.
        let lhs = sys.weighted_score(&fitted.beta_hat).unwrap();
        let mut rhs = ndarray::Array1::<f64>::zeros(ds.p());
        for (t, entries) in &naive_residuals(&ds, &fitted.beta_hat) {
            let e = naive_e(&ds, &fitted.beta_hat, *t);
            for &(r, dm) in entries {
                let row = &ds.rows()[r];
                let gi = g[ds.subject_of_row(r)];
                for j in 0..ds.p() {
                    rhs[j] += gi * dm * (row.covariates[j] - e[j]);
                }
            }
        }
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);

        // Score and baseline at an arbitrary candidate beta match the naive
        // transcription of the substitution rule.
        let cand = arr1(&(0..ds.p()).map(|j| fitted.beta_hat[j] + 0.2 * (j as f64 + 1.0)).collect::<Vec<_>>());
        let s_lib = sys.weighted_score(&cand).unwrap();
        let s_naive = naive_dmhat_score(&ds, &fitted.beta_hat, &cand, &g);
        assert!(max_abs_diff(&s_lib, &s_naive) < 1e-11);

        let b_lib = sys.baseline(&cand).unwrap();
        let b_naive = naive_dmhat_baseline(&ds, &fitted.beta_hat, &cand, &g);
        for ((t, j), (ot, oj)) in b_lib
            .times()
            .iter()
            .zip(b_lib.jumps())
            .zip(b_naive)
        {
            assert_eq!(*t, ot);
            assert_abs_diff_eq!(*j, oj, epsilon = 1e-11);
        }

        // At beta_hat the baseline is Breslow plus the multiplier correction.
        let base_hat = sys.baseline(&fitted.beta_hat).unwrap();
        let resid = naive_residuals(&ds, &fitted.beta_hat);
        for (k, ((t, j), bres)) in base_hat
            .times()
            .iter()
            .zip(base_hat.jumps())
            .zip(naive_breslow(&ds, &fitted.beta_hat))
            .enumerate()
        {
            let (s0, _, _) = naive_moments(&ds, &fitted.beta_hat, *t);
            let corr: f64 = resid[k]
                .1
                .iter()
                .map(|&(r, dm)| g[ds.subject_of_row(r)] * dm / s0)
                .sum();
            assert_eq!(*t, bres.0);
            assert_abs_diff_eq!(*j, bres.1 + corr, epsilon = 1e-12);
        }
    }
}

#[test]
fn ee_dmhat_replicate_solves_the_substituted_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let ds = random_dataset(&mut rng, 30, 1, false);
    let fitted = fit(&ds, &FitOptions::default()).unwrap();
    let g = draw_multipliers(ds.n_subjects(), MultiplierKind::Poisson, &mut rng);

    let rep = ee_replicate(&fitted, &ds, &g, Increments::Dmhat, &FitOptions::default()).unwrap();
    assert!(rep.converged);
    // The solved beta zeroes the substituted score ...
    let resid_score = naive_dmhat_score(&ds, &fitted.beta_hat, &rep.beta_star, &g);
    assert!(resid_score[0].abs() < 1e-8, "score at solution {}", resid_score[0]);
    // ... and the baseline is the substituted Breslow form there.
    let oracle = naive_dmhat_baseline(&ds, &fitted.beta_hat, &rep.beta_star, &g);
    for ((t, j), (ot, oj)) in rep
        .baseline_star
        .times()
        .iter()
        .zip(rep.baseline_star.jumps())
        .zip(oracle)
    {
        assert_eq!(*t, ot);
        assert_abs_diff_eq!(*j, oj, epsilon = 1e-10);
    }
}

#[test]
fn run_bootstrap_is_seed_deterministic_and_tracks_failures() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let ds = random_dataset(&mut rng, 30, 1, false);
    let fitted = fit(&ds, &FitOptions::default()).unwrap();
    let grid = ds.event_grid();

    let cfg = default_cfg(Scheme::EstimatingEquation, Increments::Dn, 60);
    let a = run_bootstrap(&fitted, &ds, &cfg, &grid).unwrap();
    let b = run_bootstrap(&fitted, &ds, &cfg, &grid).unwrap();
    assert_eq!(a.replicates.len(), 60);
    assert_eq!(a.n, ds.n_subjects());
    for (ra, rb) in a.replicates.iter().zip(&b.replicates) {
        assert_eq!(ra.multipliers, rb.multipliers);
        for j in 0..ds.p() {
            assert_eq!(ra.beta_star[j].to_bits(), rb.beta_star[j].to_bits());
        }
    }
    for (sa, sb) in a.sigma2_hat.iter().zip(&b.sigma2_hat) {
        assert_eq!(sa.to_bits(), sb.to_bits());
    }

    // A different seed changes the draws.
    let cfg2 = BootConfig { seed: 43, ..cfg.clone() };
    let c = run_bootstrap(&fitted, &ds, &cfg2, &grid).unwrap();
    assert_ne!(a.replicates[0].multipliers, c.replicates[0].multipliers);

    // Failed replicates are excluded from sigma2 but kept in the list.
    assert!(a.n_failed <= a.replicates.len());
    assert_eq!(
        a.replicates.iter().filter(|r| !r.converged).count(),
        a.n_failed
    );
}

#[test]
fn sigma2_is_positive_and_grows_on_simulated_data() {
    let cfg = coxband::DgpConfig {
        n: 100,
        seed: 2024,
        ..coxband::DgpConfig::default()
    };
    let ds = coxband::generate_dataset(&cfg, &mut substream(cfg.seed, 0));
    let fitted = fit(&ds, &FitOptions::default()).unwrap();
    let grid = ds.event_grid();
    let boot = default_cfg(Scheme::EstimatingEquation, Increments::Dn, 199);
    let reps = run_bootstrap(&fitted, &ds, &boot, &grid).unwrap();

    let first_in_band = grid.iter().position(|&t| t >= 0.5).unwrap();
    let last = grid.len() - 1;
    assert!(reps.sigma2_hat[first_in_band] > 0.0);
    assert!(
        reps.sigma2_hat[last] > reps.sigma2_hat[first_in_band],
        "sigma2 should grow along the interval: {} vs {}",
        reps.sigma2_hat[last],
        reps.sigma2_hat[first_in_band]
    );
}
