use std::convert::Infallible;

use firesmac_core::mdp::{
    discounted_return, rollout, ConstituencyWeights, RewardVector, SimConfig, Trajectory, TrajectoryStep,
};
use firesmac_core::policy::{sample_params, LetBurnAll, SuppressAll};
use firesmac_core::smac::{
    expected_improvement, fit_forest, generalized_expected_improvement, optimize, Bounds, ForestConfig,
    HistoryEntry, NoObserver, Origin, RunHistory, SmacConfig,
};
use firesmac_core::surrogate::{build_database, estimate_value, stitch_trajectory, EstimateConfig};
use proptest::prelude::*;

fn small() -> SimConfig {
    SimConfig { grid_width: 25, grid_height: 25, horizon_years: 15, ..SimConfig::default() }
}

fn arb_weights() -> impl Strategy<Value = ConstituencyWeights> {
    proptest::array::uniform5(0.0f64..3.0)
        .prop_filter("one nonzero", |w| w.iter().any(|v| *v > 0.0))
        .prop_map(|w| ConstituencyWeights::new(w[0], w[1], w[2], w[3], w[4]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rollouts_are_deterministic_with_valid_signs_and_mass(seed in any::<u64>(), policy in any::<u64>()) {
        let cfg = small();
        let p = sample_params(policy);
        let a = rollout(&p, seed, &cfg).unwrap();
        let b = rollout(&p, seed, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let mut last_year = 0;
        for s in &a.steps {
            prop_assert!(s.reward.has_valid_signs(), "{:?}", s.reward);
            prop_assert!(s.event.year >= last_year);
            last_year = s.event.year;
            prop_assert!(s.outcome.burned_cells as usize <= cfg.n_cells());
            prop_assert!((0.0..=1.0).contains(&s.summary.fraction_high_fuel));
            prop_assert!((0.0..=1.0).contains(&s.summary.fraction_old_lowdensity));
            prop_assert!(s.summary.total_fuel >= 0.0);
            if !s.action.is_suppress() {
                prop_assert_eq!(s.reward.suppression, 0.0);
            }
        }
    }

    #[test]
    fn suppress_all_never_smokier_than_let_burn_on_a_paired_seed_first_fire(seed in any::<u64>()) {
        // The first fire of a trajectory sees the same landscape under both policies.
        let cfg = small();
        let s = rollout(&SuppressAll, seed, &cfg).unwrap();
        let l = rollout(&LetBurnAll, seed, &cfg).unwrap();
        if let (Some(a), Some(b)) = (s.steps.first(), l.steps.first()) {
            prop_assert!(a.outcome.smoky_days <= b.outcome.smoky_days);
        }
    }

    #[test]
    fn discounting_is_per_year(
        rewards in proptest::collection::vec((0u32..20, -50.0f64..0.0), 1..30),
        gamma in 0.5f64..1.0,
    ) {
        let template = rollout(&LetBurnAll, 3, &SimConfig { horizon_years: 4, ..small() }).unwrap();
        prop_assume!(!template.steps.is_empty());
        let base = template.steps[0].clone();
        let step = |year: u32, air: f64| -> TrajectoryStep {
            let mut s = base.clone();
            s.event.year = year;
            s.reward = RewardVector { suppression: 0.0, timber: 0.0, ecology: 0.0, air, recreation: 0.0 };
            s
        };
        let mut sorted = rewards.clone();
        sorted.sort_by_key(|r| r.0);
        let single = Trajectory { steps: sorted.iter().map(|&(y, r)| step(y, r)).collect(), ..template.clone() };
        let doubled = Trajectory {
            steps: sorted.iter().flat_map(|&(y, r)| [step(y, r), step(y, r)]).collect(),
            ..template.clone()
        };
        let w = ConstituencyWeights::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let expected: f64 = sorted.iter().map(|&(y, r)| gamma.powi(y as i32) * r).sum();
        let one = discounted_return(&single, &w, gamma).unwrap();
        let two = discounted_return(&doubled, &w, gamma).unwrap();
        prop_assert!((one - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        prop_assert!((two - 2.0 * one).abs() <= 1e-9 * one.abs().max(1.0));
    }

    #[test]
    fn acquisition_is_nonnegative_and_ordered(mu in -50.0f64..50.0, sigma in 1e-3f64..20.0, f_max in -50.0f64..50.0) {
        let ei = expected_improvement(mu, sigma, f_max);
        let gei = generalized_expected_improvement(mu, sigma, f_max);
        prop_assert!(ei >= 0.0 && gei >= 0.0);
        prop_assert!(ei >= (mu - f_max).max(0.0) - 1e-9);
        // Second moment of the improvement dominates its squared mean.
        prop_assert!(gei + 1e-9 * gei.max(1.0) >= ei * ei);
        prop_assert!(expected_improvement(mu + 1.0, sigma, f_max) >= ei);
    }

    #[test]
    fn forest_predictions_stay_within_training_values(
        points in proptest::collection::vec((proptest::array::uniform3(0.0f64..1.0), -10.0f64..10.0), 1..60),
        seed in any::<u64>(),
        query in proptest::array::uniform3(-0.5f64..1.5),
    ) {
        let mut h = RunHistory::default();
        for (x, y) in &points {
            h.push(HistoryEntry { theta: x.to_vec(), value: *y, origin: Origin::Initial, iteration: 0 });
        }
        let forest = fit_forest(&h, seed, &ForestConfig::default()).unwrap();
        let p = forest.predict(&query);
        let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p.mu >= lo - 1e-9 && p.mu <= hi + 1e-9);
        prop_assert!(p.sigma2 >= 0.0 && p.sigma2 <= (hi - lo).powi(2) / 4.0 + 1e-9);
        prop_assert_eq!(forest.trees().len(), 10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimize_history_is_well_formed(budget in 20usize..45, seed in any::<u64>()) {
        let bounds = Bounds::uniform(3, -2.0, 2.0).unwrap();
        let mut config = SmacConfig::default();
        config.proposal.random_pool = 300;
        let r = optimize(
            |x: &[f64]| Ok::<_, Infallible>(-x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>()),
            &bounds,
            budget,
            seed,
            &config,
            &mut NoObserver,
        )
        .unwrap();
        let e = r.history.entries();
        prop_assert_eq!(e.len(), budget);
        prop_assert!(e.windows(2).all(|w| w[0].iteration <= w[1].iteration));
        prop_assert!(e.iter().all(|x| x.value.is_finite() && bounds.contains(&x.theta)));
        let best = e.iter().map(|x| x.value).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.best_value, best);
        let first_best = e.iter().find(|x| x.value == best).unwrap();
        prop_assert_eq!(&r.best_theta, &first_best.theta);
    }

    #[test]
    fn stitched_values_are_deterministic(policy in any::<u64>(), w in arb_weights()) {
        let cfg = SimConfig { horizon_years: 10, ..small() };
        let db = build_database(6, 1, &cfg, 9).unwrap();
        let p = sample_params(policy);
        let est = EstimateConfig { n_trajectories: 4, ..EstimateConfig::default() };
        let a = estimate_value(&db, &p, &w, cfg.discount, &est).unwrap();
        let b = estimate_value(&db, &p, &w, cfg.discount, &est).unwrap();
        prop_assert_eq!(a.mean, b.mean);
        prop_assert_eq!(a.per_trajectory.len(), 4);
        let t = stitch_trajectory(&db, &p, est.trajectory_seed(0)).unwrap();
        prop_assert!(t.steps.iter().all(|s| s.reward.has_valid_signs()));
    }
}
