//! Diagnostic: per-cell coverage under several grid-evaluation conventions
//! and a breakdown of where violations occur (left endpoint, right endpoint,
//! interior event times).

use coxband::*;

fn run(multiplier: MultiplierKind, label: &str) {
    let dgp = DgpConfig::default(); // n=100, beta0=0.3, sd 4, censor 3
    let boot = BootConfig {
        scheme: Scheme::EstimatingEquation,
        increments: Increments::Dn,
        multiplier,
        b: 499,
        seed: 514_100,
        fit_options: FitOptions::default(),
    };
    let reps_total = 600usize;
    let cells = [
        (WeightKind::HallWellner, Transform::Identity, "hw-id"),
        (WeightKind::HallWellner, Transform::Log, "hw-log"),
        (WeightKind::EqualPrecision, Transform::Identity, "ep-id"),
        (WeightKind::EqualPrecision, Transform::Log, "ep-log"),
    ];

    // Conventions: 0 = all grid points, 1 = events only, 2 = events + t1,
    // 3 = events + t2.
    let mut covered = [[0usize; 4]; 4];
    let mut evaluated = [0usize; 4];
    // Violation sites per cell: [t1 only, interior events, t2 only]
    let mut sites = [[0usize; 3]; 4];

    let mut attempt = 0u64;
    let mut done = 0usize;
    while done < reps_total && attempt < 3 * reps_total as u64 {
        let base = attempt << 20;
        attempt += 1;
        let ds = generate_dataset(&dgp, &mut substream(boot.seed, base));
        let Ok(fitted) = fit(&ds, &FitOptions::default()) else {
            continue;
        };
        let rep_boot = BootConfig {
            seed: boot.seed ^ (base | 1),
            ..boot.clone()
        };
        let Ok(reps) = run_bootstrap(&fitted, &ds, &rep_boot, &[0.5, 3.0]) else {
            continue;
        };
        done += 1;

        let event_times = fitted.baseline.times();
        for (k, (w, tr, _)) in cells.iter().enumerate() {
            let spec = BandSpec {
                interval: (0.5, 3.0),
                alpha: 0.05,
                weight: *w,
                transform: *tr,
            };
            let Ok(band) = build_band(&fitted, &reps, &spec) else {
                continue;
            };
            evaluated[k] += 1;
            let mut viol_t1 = false;
            let mut viol_event = false;
            let mut viol_t2 = false;
            let last = band.grid.len() - 1;
            for (j, &t) in band.grid.iter().enumerate() {
                let truth = true_cumulative_hazard(t);
                if band.lower[j] <= truth && truth <= band.upper[j] {
                    continue;
                }
                let is_event = event_times.binary_search_by(|p| p.total_cmp(&t)).is_ok();
                if is_event {
                    viol_event = true;
                } else if j == 0 {
                    viol_t1 = true;
                } else if j == last {
                    viol_t2 = true;
                }
            }
            if viol_t1 {
                sites[k][0] += 1;
            }
            if viol_event {
                sites[k][1] += 1;
            }
            if viol_t2 {
                sites[k][2] += 1;
            }
            if !(viol_t1 || viol_event || viol_t2) {
                covered[0][k] += 1;
            }
            if !viol_event {
                covered[1][k] += 1;
            }
            if !(viol_event || viol_t1) {
                covered[2][k] += 1;
            }
            if !(viol_event || viol_t2) {
                covered[3][k] += 1;
            }
        }
    }

    println!("== {label}: {done} repetitions ==");
    println!("cell      all    events  ev+t1   ev+t2   | viol at t1 / interior / t2");
    for (k, (_, _, name)) in cells.iter().enumerate() {
        let e = evaluated[k] as f64;
        println!(
            "{name:8} {:.3}   {:.3}   {:.3}   {:.3}   |  {:4} / {:4} / {:4}",
            covered[0][k] as f64 / e,
            covered[1][k] as f64 / e,
            covered[2][k] as f64 / e,
            covered[3][k] as f64 / e,
            sites[k][0],
            sites[k][1],
            sites[k][2],
        );
    }
}

fn main() {
    run(MultiplierKind::Exponential, "exponential");
    run(MultiplierKind::Normal, "normal");
}
