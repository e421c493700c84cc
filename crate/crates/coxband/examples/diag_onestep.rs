//! Decisive construction comparison. One-step estimating-equation replicates
//! (dN and dMhat increments), range (0,t2] sups, all-points evaluation.
//! Sigma sources: 0 = bootstrap empirical, 1 = martingale plug-in,
//! 2 = predictable (left-continuous) martingale plug-in (sup only).
//!
//! Constructions (band sigma | EP sup sigma | HW sup sigma):
//!   P1: plug | plug-lag | boot
//!   P2: plug | plug     | boot
//!   P3: boot | boot     | boot   (production reference)

use coxband::{
    critical_value, draw_multipliers, fit, generate_dataset, substream, DgpConfig, FitOptions,
    MultiplierKind,
};

const B: usize = 499;
const T1: f64 = 0.5;
const T2: f64 = 3.0;
const ALPHA: f64 = 0.05;
const SEED: u64 = 514_100;

const CELLS: [&str; 4] = ["ep-id", "ep-log", "hw-id", "hw-log"];
// sigma sources: 0 = bootstrap empirical, 1 = martingale plug-in, 2 = greenwood
struct Construction {
    name: &'static str,
    band_ep: usize,
    band_hw: usize,
    ep_sup: usize,
    hw_sup: usize,
}
const CONSTRUCTIONS: [Construction; 4] = [
    Construction { name: "P2 pl,pl|pl,bt", band_ep: 1, band_hw: 1, ep_sup: 1, hw_sup: 0 },
    Construction { name: "P6 gw,pl|bt,bt", band_ep: 2, band_hw: 1, ep_sup: 0, hw_sup: 0 },
    Construction { name: "P7 gw,gw|bt,bt", band_ep: 2, band_hw: 2, ep_sup: 0, hw_sup: 0 },
    Construction { name: "P8 gw,pl|gw,bt", band_ep: 2, band_hw: 1, ep_sup: 2, hw_sup: 0 },
];
const NCONS: usize = 4;

struct Sweep {
    order: Vec<usize>,
    stops: Vec<f64>,
    xs: Vec<f64>,
}

impl Sweep {
    fn new(stops: &[f64], xs: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..stops.len()).collect();
        order.sort_by(|&a, &b| stops[b].total_cmp(&stops[a]));
        Sweep { order, stops: stops.to_vec(), xs: xs.to_vec() }
    }

    /// S0,S1,S2 at each event time for the exp(beta*x) weights.
    fn moments(&self, beta: f64, events: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k_total = events.len();
        let mut s0 = vec![0.0; k_total];
        let mut s1 = vec![0.0; k_total];
        let mut s2 = vec![0.0; k_total];
        let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
        let mut idx = 0usize;
        for k in (0..k_total).rev() {
            let t = events[k];
            while idx < self.order.len() && self.stops[self.order[idx]] >= t {
                let x = self.xs[self.order[idx]];
                let w = (beta * x).exp();
                a0 += w;
                a1 += w * x;
                a2 += w * x * x;
                idx += 1;
            }
            s0[k] = a0;
            s1[k] = a1;
            s2[k] = a2;
        }
        (s0, s1, s2)
    }

    /// risk-set sums of g_i*w_i and g_i*w_i*x_i at each event time,
    /// for fixed per-subject weights w (beta-hat scale).
    fn g_moments(&self, gw: &[f64], gwx: &[f64], events: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k_total = events.len();
        let mut g0 = vec![0.0; k_total];
        let mut g1 = vec![0.0; k_total];
        let (mut a0, mut a1) = (0.0, 0.0);
        let mut idx = 0usize;
        for k in (0..k_total).rev() {
            let t = events[k];
            while idx < self.order.len() && self.stops[self.order[idx]] >= t {
                a0 += gw[self.order[idx]];
                a1 += gwx[self.order[idx]];
                idx += 1;
            }
            g0[k] = a0;
            g1[k] = a1;
        }
        (g0, g1)
    }
}

fn main() {
    for &(n, mult, label, r) in &[
        (100usize, MultiplierKind::Normal, "n100norm", 800usize),
        (100, MultiplierKind::Exponential, "n100exp", 800),
        (400, MultiplierKind::Poisson, "n400pois", 500),
    ] {
        run(n, mult, label, r);
    }
}

fn run(n_subj: usize, mult: MultiplierKind, label: &str, r_target: usize) {
    let dgp = DgpConfig { n: n_subj, ..DgpConfig::default() };
    // covered[increments 0=dN 1=dM][construction][cell]
    let mut covered = [[[0usize; 4]; NCONS]; 2];
    let mut cstar_ep_sum = [[0f64; NCONS]; 2];
    let mut cstar_lo_sum = [[0f64; NCONS]; 2];
    let mut done = 0usize;
    let mut attempt = 0u64;

    while done < r_target {
        let data = generate_dataset(&dgp, &mut substream(SEED, attempt << 20));
        attempt += 1;
        let fitted = match fit(&data, &FitOptions::default()) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let beta_hat = fitted.beta_hat[0];
        let stops: Vec<f64> = data.rows().iter().map(|r| r.stop).collect();
        let xs: Vec<f64> = data.rows().iter().map(|r| r.covariates[0]).collect();
        let events: Vec<f64> = data.event_times().to_vec();
        let k_total = events.len();
        let mut ev_subject = vec![usize::MAX; k_total];
        let mut ev_x = vec![f64::NAN; k_total];
        for (r, row) in data.rows().iter().enumerate() {
            if row.status {
                let k = events.partition_point(|&t| t < row.stop);
                ev_subject[k] = data.subject_of_row(r);
                ev_x[k] = row.covariates[0];
            }
        }
        if ev_subject.iter().any(|&s| s == usize::MAX) {
            continue;
        }
        let sweep = Sweep::new(&stops, &xs);
        let (s0_hat, s1_hat, s2_hat) = sweep.moments(beta_hat, &events);
        let e_hat: Vec<f64> = (0..k_total).map(|k| s1_hat[k] / s0_hat[k]).collect();
        let vbar: Vec<f64> = (0..k_total)
            .map(|k| s2_hat[k] / s0_hat[k] - e_hat[k] * e_hat[k])
            .collect();
        let dlam: Vec<f64> = (0..k_total).map(|k| 1.0 / s0_hat[k]).collect();
        let w_subj: Vec<f64> = xs.iter().map(|&x| (beta_hat * x).exp()).collect();

        let mut grid: Vec<f64> = events.iter().copied().filter(|&t| t <= T2).collect();
        let pos1 = grid.partition_point(|&t| t < T1);
        grid.insert(pos1, T1);
        grid.push(T2);
        let lo = pos1;
        let g_len = grid.len();
        let last_ev: Vec<usize> = grid
            .iter()
            .map(|&t| events.partition_point(|&e| e <= t))
            .collect();
        let est: Vec<f64> = grid.iter().map(|&t| fitted.baseline.eval(t)).collect();
        let n = data.n_subjects() as f64;

        // replicate paths for dN and dMhat increments
        let mut paths: [Vec<Vec<f64>>; 2] = [Vec::with_capacity(B), Vec::with_capacity(B)];
        let mut gw = vec![0.0; data.n_subjects()];
        let mut gwx = vec![0.0; data.n_subjects()];
        for b in 0..B {
            let g = draw_multipliers(
                data.n_subjects(),
                mult,
                &mut substream(SEED ^ ((attempt << 1) | 1), b as u64 + 1),
            );
            for i in 0..data.n_subjects() {
                gw[i] = g[i] * w_subj[i];
                gwx[i] = gw[i] * xs[i];
            }
            let (g0, g1) = sweep.g_moments(&gw, &gwx, &events);
            for inc in 0..2 {
                let mut u = 0.0;
                let mut jac = 0.0;
                let mut mass = vec![0.0; k_total];
                for k in 0..k_total {
                    let ge = g[ev_subject[k]];
                    let (m, a) = if inc == 0 {
                        (1.0 + ge, (1.0 + ge) * ev_x[k])
                    } else {
                        (
                            1.0 + ge - dlam[k] * g0[k],
                            (1.0 + ge) * ev_x[k] - dlam[k] * g1[k],
                        )
                    };
                    mass[k] = m;
                    u += a - m * e_hat[k];
                    jac += m * vbar[k];
                }
                let beta1 = beta_hat + u / jac;
                if !beta1.is_finite() {
                    continue;
                }
                let (s0_1, _, _) = sweep.moments(beta1, &events);
                let mut cum = vec![0.0; k_total + 1];
                let mut ok = true;
                for k in 0..k_total {
                    let j = mass[k] / s0_1[k];
                    if !j.is_finite() {
                        ok = false;
                        break;
                    }
                    cum[k + 1] = cum[k] + j;
                }
                if !ok {
                    continue;
                }
                paths[inc].push(last_ev.iter().map(|&k| cum[k]).collect());
            }
        }
        if paths[0].len() < 2 || paths[1].len() < 2 {
            continue;
        }

        // plug-in sigma^2 (current and predictable/lagged) on the grid
        let mut sig2_plug = vec![0.0f64; g_len];
        let mut sig2_lag = vec![0.0f64; g_len];
        {
            let mut acc = 0.0;
            let mut prev = 0.0;
            let mut k = 0usize;
            for j in 0..g_len {
                while k < last_ev[j] {
                    prev = acc;
                    acc += dlam[k] * dlam[k];
                    k += 1;
                }
                sig2_plug[j] = n * acc;
                // value just before the latest event covered by grid point j
                sig2_lag[j] = n * if last_ev[j] == 0 { 0.0 } else { prev };
            }
        }
        if sig2_plug[lo..].iter().any(|&s| s <= 0.0) || est[lo..].iter().any(|&e| e <= 0.0) {
            continue;
        }

        let mut all_ok = true;
        let mut rep_covered = [[[false; 4]; NCONS]; 2];
        let mut rep_cep = [[0f64; NCONS]; 2];
        let mut rep_clo = [[0f64; NCONS]; 2];
        for inc in 0..2 {
            let rows_mat = &paths[inc];
            let m = rows_mat.len() as f64;
            let mut sig2_boot = vec![0.0f64; g_len];
            for j in 0..g_len {
                let mean: f64 = rows_mat.iter().map(|r| r[j]).sum::<f64>() / m;
                let var: f64 =
                    rows_mat.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
                sig2_boot[j] = n * var;
            }
            if sig2_boot[lo..].iter().any(|&s| s <= 0.0) {
                all_ok = false;
                break;
            }
            let sig2 = [&sig2_boot, &sig2_plug, &sig2_lag];
            // sups [source][family]; lag source only used for EP.
            // signed EP sups [source][0=pos overshoot,1=neg undershoot]
            let mut sups = vec![[[0f64; 2]; 3]; rows_mat.len()];
            let mut sups_signed = vec![[[0f64; 2]; 3]; rows_mat.len()];
            for (bi, row) in rows_mat.iter().enumerate() {
                for j in 0..g_len {
                    let diff = row[j] - est[j];
                    let dev = diff.abs();
                    for s in 0..3 {
                        let s2 = sig2[s][j];
                        if s2 > 0.0 {
                            let z_ep = n.sqrt() / s2.sqrt() * dev;
                            if z_ep.is_finite() {
                                sups[bi][s][0] = sups[bi][s][0].max(z_ep);
                                let side = if diff >= 0.0 { 0 } else { 1 };
                                sups_signed[bi][s][side] = sups_signed[bi][s][side].max(z_ep);
                            }
                        }
                        let z_hw = n.sqrt() / (1.0 + s2) * dev;
                        if z_hw.is_finite() {
                            sups[bi][s][1] = sups[bi][s][1].max(z_hw);
                        }
                    }
                }
            }
            let mut cstar = [[0f64; 2]; 3];
            let mut cstar_et = [[0f64; 2]; 3];
            for s in 0..3 {
                for f in 0..2 {
                    let col: Vec<f64> = sups.iter().map(|x| x[s][f]).collect();
                    match critical_value(&col, ALPHA) {
                        Ok(c) => cstar[s][f] = c,
                        Err(_) => all_ok = false,
                    }
                    let col: Vec<f64> = sups_signed.iter().map(|x| x[s][f]).collect();
                    match critical_value(&col, ALPHA / 2.0) {
                        Ok(c) => cstar_et[s][f] = c,
                        Err(_) => all_ok = false,
                    }
                }
            }
            if !all_ok {
                break;
            }
            for (ci, cons) in CONSTRUCTIONS.iter().enumerate() {
                let (c_up, c_lo) = if cons.ep_equal_tail {
                    (cstar_et[cons.ep_sup][0], cstar_et[cons.ep_sup][1])
                } else {
                    (cstar[cons.ep_sup][0], cstar[cons.ep_sup][0])
                };
                rep_cep[inc][ci] = c_up;
                rep_clo[inc][ci] = c_lo;
                for (cell, (fam, log)) in
                    [(0usize, false), (0, true), (1, false), (1, true)].into_iter().enumerate()
                {
                    let (cu, cl) = if fam == 0 {
                        (c_up, c_lo)
                    } else {
                        (cstar[cons.hw_sup][1], cstar[cons.hw_sup][1])
                    };
                    let mut miss = false;
                    for j in lo..g_len {
                        let truth = grid[j];
                        let s2 = sig2[cons.band][j];
                        let w = if fam == 0 {
                            n.sqrt() / s2.sqrt()
                        } else {
                            n.sqrt() / (1.0 + s2)
                        };
                        let (lower, upper) = if log {
                            (
                                est[j] * (-cl / (w * est[j])).exp(),
                                est[j] * (cu / (w * est[j])).exp(),
                            )
                        } else {
                            ((est[j] - cl / w).max(0.0), est[j] + cu / w)
                        };
                        if truth < lower || truth > upper {
                            miss = true;
                            break;
                        }
                    }
                    rep_covered[inc][ci][cell] = !miss;
                }
            }
        }
        if !all_ok {
            continue;
        }
        for inc in 0..2 {
            for ci in 0..NCONS {
                cstar_ep_sum[inc][ci] += rep_cep[inc][ci];
                cstar_lo_sum[inc][ci] += rep_clo[inc][ci];
                for cell in 0..4 {
                    if rep_covered[inc][ci][cell] {
                        covered[inc][ci][cell] += 1;
                    }
                }
            }
        }
        // Sufficient statistics for the EP critical-value choice, plug-in band width:
        // minimal covering c per transform (needed over [t1,t2] all points), plus
        // the per-rep c* delivered by each candidate sup rule (dN pool).
        {
            let mut need = [[0f64; 2]; 2]; // [inc][id,log]
            for inc in 0..2 {
                for j in lo..g_len {
                    let truth = grid[j];
                    let w = n.sqrt() / sig2_plug[j].sqrt();
                    need[inc][0] = need[inc][0].max(w * (truth - est[j]).abs());
                    need[inc][1] =
                        need[inc][1].max(w * est[j] * (truth / est[j]).ln().abs());
                }
            }
            // per-rep c* candidates from the dN replicate pool, EP family:
            // plug-F, boot-F, lag-F, plug-I, boot-I
            let rows_mat = &paths[0];
            let m = rows_mat.len() as f64;
            let mut sig2_boot = vec![0.0f64; g_len];
            for j in 0..g_len {
                let mean: f64 = rows_mat.iter().map(|r| r[j]).sum::<f64>() / m;
                sig2_boot[j] =
                    n * rows_mat.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            }
            let mut cands = [0f64; 5];
            let variants: [(&[f64], usize); 5] = [
                (&sig2_plug, 0),
                (&sig2_boot, 0),
                (&sig2_lag, 0),
                (&sig2_plug, 1),
                (&sig2_boot, 1),
            ];
            for (vi, (s2v, range)) in variants.iter().enumerate() {
                let lo_j = if *range == 1 { lo } else { 0 };
                let sups: Vec<f64> = rows_mat
                    .iter()
                    .map(|row| {
                        let mut s = 0.0f64;
                        for j in lo_j..g_len {
                            if s2v[j] > 0.0 {
                                let z = n.sqrt() / s2v[j].sqrt() * (row[j] - est[j]).abs();
                                if z.is_finite() {
                                    s = s.max(z);
                                }
                            }
                        }
                        s
                    })
                    .collect();
                cands[vi] = critical_value(&sups, ALPHA).unwrap_or(f64::NAN);
            }
            println!(
                "REP {label} need_id {:.3} {:.3} need_log {:.3} {:.3} c plugF {:.3} bootF {:.3} lagF {:.3} plugI {:.3} bootI {:.3}",
                need[0][0], need[1][0], need[0][1], need[1][1],
                cands[0], cands[1], cands[2], cands[3], cands[4]
            );
        }
        done += 1;
    }

    println!("== {label}: R={done}");
    for (ci, cons) in CONSTRUCTIONS.iter().enumerate() {
        for inc in 0..2 {
            let tag = if inc == 0 { "dN" } else { "dM" };
            let cells: Vec<String> = (0..4)
                .map(|cell| {
                    format!(
                        "{} {:5.1}",
                        CELLS[cell],
                        100.0 * covered[inc][ci][cell] as f64 / done as f64
                    )
                })
                .collect();
            println!(
                "  {} {tag} | {}  (c*_ep up {:.3} lo {:.3})",
                cons.name,
                cells.join("  "),
                cstar_ep_sum[inc][ci] / done as f64,
                cstar_lo_sum[inc][ci] / done as f64
            );
        }
        let maxgap = (0..4)
            .map(|cell| {
                (covered[0][ci][cell] as f64 - covered[1][ci][cell] as f64).abs() / done as f64
            })
            .fold(0.0f64, f64::max);
        println!("  {}    max |dN-dM| gap: {:.1} pp", cons.name, 100.0 * maxgap);
    }
}
