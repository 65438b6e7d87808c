//! Prints per-component discounted returns and landscape trends for the
//! trivial policies and a few sampled tree policies.

use std::time::Instant;

use firesmac_core::mdp::{discounted_return, rollout, ConstituencyWeights, SimConfig};
use firesmac_core::policy::{sample_params, LetBurnAll, Policy, SuppressAll};

fn main() {
    let cfg = SimConfig::default();
    let comps = [
        ("suppression", ConstituencyWeights::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap()),
        ("timber", ConstituencyWeights::new(0.0, 1.0, 0.0, 0.0, 0.0).unwrap()),
        ("ecology", ConstituencyWeights::new(0.0, 0.0, 1.0, 0.0, 0.0).unwrap()),
        ("air", ConstituencyWeights::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap()),
        ("recreation", ConstituencyWeights::new(0.0, 0.0, 0.0, 0.0, 1.0).unwrap()),
    ];
    let p1 = sample_params(1);
    let p2 = sample_params(2);
    let policies: Vec<(&str, &dyn Policy)> =
        vec![("suppress-all", &SuppressAll), ("let-burn-all", &LetBurnAll), ("tree-1", &p1), ("tree-2", &p2)];
    let n = 30;
    for (name, policy) in policies {
        let start = Instant::now();
        let trajs: Vec<_> = (0..n).map(|s| rollout(policy, s, &cfg).unwrap()).collect();
        let dt = start.elapsed().as_secs_f64() / n as f64;
        println!("== {name}  ({:.1} ms/rollout)", dt * 1e3);
        let steps: usize = trajs.iter().map(|t| t.steps.len()).sum();
        let burned: u64 = trajs.iter().flat_map(|t| &t.steps).map(|s| s.outcome.burned_cells as u64).sum();
        let smoky: u64 = trajs.iter().map(|t| t.total_smoky_days()).sum();
        let sup: usize = trajs.iter().map(|t| t.suppressed()).sum();
        println!(
            "  steps/traj {:.1}  burned/fire {:.1}  smoky/traj {:.1}  suppressed {:.2}",
            steps as f64 / n as f64,
            burned as f64 / steps as f64,
            smoky as f64 / n as f64,
            sup as f64 / steps as f64
        );
        for y in [0u32, 10, 25, 50, 75, 99] {
            let (mut hf, mut ol, mut c) = (0.0, 0.0, 0);
            for t in &trajs {
                if let Some(s) = t.steps.iter().rfind(|s| s.event.year <= y) {
                    hf += s.summary.fraction_high_fuel;
                    ol += s.summary.fraction_old_lowdensity;
                    c += 1;
                }
            }
            print!("  y{y}: hf {:.3} ol {:.3} |", hf / c as f64, ol / c as f64);
        }
        println!();
        let mut total = vec![0.0; n as usize];
        for (cname, w) in &comps {
            let v: Vec<f64> = trajs.iter().map(|t| discounted_return(t, w, cfg.discount).unwrap()).collect();
            for (i, x) in v.iter().enumerate() {
                total[i] += x;
            }
            let m = v.iter().sum::<f64>() / n as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            println!("  {cname:<12} mean {m:>10.1}  sd {sd:>8.1}");
        }
        let m = total.iter().sum::<f64>() / n as f64;
        let sd = (total.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        println!("  {:<12} mean {m:>10.1}  sd {sd:>8.1}", "composite");
    }
}
