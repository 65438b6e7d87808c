//! Real-simulator validation of an optimized policy against the two trivial
//! policies.

use firesmac_core::mdp::{discounted_return, rollout, ConstituencyWeights, SimConfig};
use firesmac_core::policy::{LetBurnAll, Policy, PolicyParams, SuppressAll};
use firesmac_core::rng::{derive_seed, stream};
use firesmac_core::surrogate::{estimate_value, EstimateConfig, TrajectoryDb};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::WorkbenchError;

pub const MIN_ROLLOUTS: usize = 50;

/// Linearly interpolated sample quantile (the common "type 7" definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.q1..=self.q3).contains(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatedPolicy {
    Incumbent,
    SuppressAll,
    LetBurnAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValidation {
    pub policy: ValidatedPolicy,
    pub returns: Vec<f64>,
    pub mean: f64,
    pub quartiles: Quartiles,
    /// Surrogate estimate for the same weights.
    pub surrogate_estimate: f64,
    pub suppression_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub weights: ConstituencyWeights,
    pub n_rollouts: usize,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyValidation>,
    /// Fraction of ignitions the incumbent suppressed in validation.
    pub suppression_fraction: f64,
}

impl ValidationReport {
    pub fn get(&self, policy: ValidatedPolicy) -> &PolicyValidation {
        self.policies.iter().find(|p| p.policy == policy).expect("report has all three policies")
    }
}

/// One validation rollout, as stored line by line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLine {
    pub policy: ValidatedPolicy,
    pub rollout: usize,
    pub seed: u64,
    pub discounted_return: f64,
    pub ignitions: usize,
    pub suppressed: usize,
    pub smoky_days: u64,
}

pub fn validation_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| derive_seed(base, stream::VALIDATION, i as u64)).collect()
}

fn evaluate<P: Policy>(
    which: ValidatedPolicy,
    policy: &P,
    seeds: &[u64],
    weights: &ConstituencyWeights,
    sim: &SimConfig,
) -> Result<Vec<RolloutLine>, WorkbenchError> {
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let traj = rollout(policy, seed, sim)?;
            Ok(RolloutLine {
                policy: which,
                rollout: i,
                seed,
                discounted_return: discounted_return(&traj, weights, sim.discount)?,
                ignitions: traj.steps.len(),
                suppressed: traj.suppressed(),
                smoky_days: traj.total_smoky_days(),
            })
        })
        .collect()
}

/// Roll out the incumbent and both trivial policies `n_rollouts` times each
/// on the real simulator, with the same seeds for all three.
pub fn validate(
    incumbent: &PolicyParams,
    incumbent_estimate: f64,
    weights: &ConstituencyWeights,
    db: &TrajectoryDb,
    estimate: &EstimateConfig,
    n_rollouts: usize,
    seed: u64,
) -> Result<(ValidationReport, Vec<RolloutLine>), WorkbenchError> {
    if n_rollouts < MIN_ROLLOUTS {
        return Err(WorkbenchError::Invalid(format!(
            "validation needs at least {MIN_ROLLOUTS} rollouts, got {n_rollouts}"
        )));
    }
    let sim = db.config();
    let seeds = validation_seeds(seed, n_rollouts);
    let mut lines = evaluate(ValidatedPolicy::Incumbent, incumbent, &seeds, weights, sim)?;
    lines.extend(evaluate(ValidatedPolicy::SuppressAll, &SuppressAll, &seeds, weights, sim)?);
    lines.extend(evaluate(ValidatedPolicy::LetBurnAll, &LetBurnAll, &seeds, weights, sim)?);

    let mut policies = Vec::new();
    for which in [ValidatedPolicy::Incumbent, ValidatedPolicy::SuppressAll, ValidatedPolicy::LetBurnAll] {
        let mine: Vec<&RolloutLine> = lines.iter().filter(|l| l.policy == which).collect();
        let returns: Vec<f64> = mine.iter().map(|l| l.discounted_return).collect();
        let ignitions: usize = mine.iter().map(|l| l.ignitions).sum();
        let suppressed: usize = mine.iter().map(|l| l.suppressed).sum();
        let surrogate_estimate = match which {
            ValidatedPolicy::Incumbent => incumbent_estimate,
            ValidatedPolicy::SuppressAll => {
                estimate_value(db, &SuppressAll, weights, sim.discount, estimate)?.mean
            }
            ValidatedPolicy::LetBurnAll => {
                estimate_value(db, &LetBurnAll, weights, sim.discount, estimate)?.mean
            }
        };
        policies.push(PolicyValidation {
            policy: which,
            mean: returns.iter().sum::<f64>() / returns.len() as f64,
            quartiles: Quartiles::of(&returns),
            returns,
            surrogate_estimate,
            suppression_fraction: if ignitions == 0 { 0.0 } else { suppressed as f64 / ignitions as f64 },
        });
    }
    let suppression_fraction = policies[0].suppression_fraction;
    let report = ValidationReport { weights: *weights, n_rollouts, seeds, policies, suppression_fraction };
    Ok((report, lines))
}
