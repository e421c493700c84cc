//! Temporary: compare mean-centered vs estimate-centered bootstrap variance.
use coxband::*;

fn main() {
    let anchors = [1.0_f64, 2.0, 2.5, 2.9, 3.0];
    for mult in [MultiplierKind::Exponential, MultiplierKind::Normal] {
        let dgp = DgpConfig::default();
        let boot = BootConfig {
            scheme: Scheme::EstimatingEquation,
            increments: Increments::Dn,
            multiplier: mult,
            b: 499,
            seed: 514_100,
            fit_options: FitOptions::default(),
        };
        let mut ratio_sum = vec![0.0_f64; anchors.len()];
        let mut done = 0usize;
        let mut attempt = 0u64;
        while done < 150 && attempt < 450 {
            let base = attempt << 20;
            attempt += 1;
            let ds = generate_dataset(&dgp, &mut substream(boot.seed, base));
            let Ok(fitted) = fit(&ds, &FitOptions::default()) else { continue };
            let rb = BootConfig { seed: boot.seed ^ (base | 1), ..boot.clone() };
            let Ok(reps) = run_bootstrap(&fitted, &ds, &rb, &[0.5, 3.0]) else { continue };
            done += 1;
            for (j, &t) in anchors.iter().enumerate() {
                let est = fitted.baseline.eval(t);
                let vals: Vec<f64> = reps.replicates.iter().filter(|r| r.converged)
                    .map(|r| r.baseline_star.eval(t)).collect();
                let k = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / k;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                let msq = vals.iter().map(|v| (v - est).powi(2)).sum::<f64>() / k;
                ratio_sum[j] += msq / var.max(1e-300);
            }
        }
        println!("== {mult:?}: mean over {done} repetitions of meansq/var ==");
        for (j, &t) in anchors.iter().enumerate() {
            println!("t={t:4.2}  ratio {:8.3}", ratio_sum[j] / done as f64);
        }
    }
}
