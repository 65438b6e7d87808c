//! Sequential model-based optimization with a random-forest value model.
//!
//! Every iteration refits the forest on all observations, proposes a batch of
//! candidates (half chosen by generalized expected improvement, half uniform
//! random) and evaluates the batch in parallel.

pub mod acquisition;
pub mod forest;
pub mod io;
pub mod proposal;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::policy::{lower_bounds, upper_bounds};
use crate::rng::{child_rng, derive_seed, stream};

pub use acquisition::{expected_improvement, generalized_expected_improvement};
pub use forest::{fit_forest, Forest, ForestConfig, Prediction, TreeNode};
pub use proposal::{propose_candidates, Candidate, ProposalConfig};

type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, thiserror::Error)]
pub enum SmacError {
    #[error("forest fit failed: {0}")]
    Fit(String),
    #[error("candidate proposal failed: {0}")]
    Proposal(String),
    #[error("budget {budget} is below the minimum of {min}")]
    Budget { budget: usize, min: usize },
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("objective failed at theta {theta:?}: {source}")]
    Objective { theta: Vec<f64>, source: BoxError },
    #[error("objective returned non-finite value {value} at theta {theta:?}")]
    NonFinite { theta: Vec<f64>, value: f64 },
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SmacError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SmacError::Bounds("lower and upper must be nonempty and equal length".into()));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(SmacError::Bounds(format!("dimension {d}: [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dims: usize, lower: f64, upper: f64) -> Result<Self, SmacError> {
        Self::new(vec![lower; dims], vec![upper; dims])
    }

    /// The 14-parameter decision-tree policy box.
    pub fn policy() -> Self {
        Self::new(lower_bounds(), upper_bounds()).expect("policy bounds are valid")
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter().enumerate().all(|(d, v)| (self.lower[d]..=self.upper[d]).contains(v))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(d, v)| v.clamp(self.lower[d], self.upper[d])).collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dims())
            .map(|d| {
                let (l, u) = (self.lower[d], self.upper[d]);
                if l < u {
                    rng.random_range(l..u)
                } else {
                    l
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Acquisition,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub theta: Vec<f64>,
    pub value: f64,
    pub origin: Origin,
    pub iteration: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    entries: Vec<HistoryEntry>,
}

impl RunHistory {
    pub fn push(&mut self, entry: HistoryEntry) {
        debug_assert!(entry.value.is_finite());
        debug_assert!(self.entries.last().is_none_or(|l| l.iteration <= entry.iteration));
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest value; ties go to the earliest entry.
    pub fn best(&self) -> Option<&HistoryEntry> {
        self.entries.iter().reduce(|best, e| if e.value > best.value { e } else { best })
    }

    /// The `k` highest-valued entries, ties broken by position.
    pub fn top_k(&self, k: usize) -> Vec<&HistoryEntry> {
        let mut refs: Vec<&HistoryEntry> = self.entries.iter().collect();
        refs.sort_by(|a, b| b.value.total_cmp(&a.value));
        refs.truncate(k);
        refs
    }

    /// Running maximum after each entry.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.entries
            .iter()
            .map(|e| {
                best = best.max(e.value);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmacConfig {
    pub n_initial: usize,
    pub forest: ForestConfig,
    pub proposal: ProposalConfig,
}

impl Default for SmacConfig {
    fn default() -> Self {
        Self { n_initial: 10, forest: ForestConfig::default(), proposal: ProposalConfig::default() }
    }
}

impl SmacConfig {
    pub fn min_budget(&self) -> usize {
        self.n_initial + self.proposal.batch_size()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmacResult {
    pub best_theta: Vec<f64>,
    pub best_value: f64,
    pub history: RunHistory,
}

/// Called after each evaluated batch with the entries it appended.
pub trait Observer {
    fn on_batch(&mut self, iteration: u32, batch: &[HistoryEntry]);
}

impl<F: FnMut(u32, &[HistoryEntry])> Observer for F {
    fn on_batch(&mut self, iteration: u32, batch: &[HistoryEntry]) {
        self(iteration, batch)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn on_batch(&mut self, _: u32, _: &[HistoryEntry]) {}
}

fn evaluate_batch<F, E>(
    objective: &F,
    batch: Vec<(Vec<f64>, Origin)>,
    iteration: u32,
) -> Result<Vec<HistoryEntry>, SmacError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Into<BoxError> + Send,
{
    let values: Vec<Result<f64, E>> = batch.par_iter().map(|(theta, _)| objective(theta)).collect();
    batch
        .into_iter()
        .zip(values)
        .map(|((theta, origin), value)| match value {
            Err(e) => Err(SmacError::Objective { theta, source: e.into() }),
            Ok(value) if !value.is_finite() => Err(SmacError::NonFinite { theta, value }),
            Ok(value) => Ok(HistoryEntry { theta, value, origin, iteration }),
        })
        .collect()
}

/// Maximize `objective` over `bounds` using exactly `budget` evaluations.
///
/// If the budget does not divide into whole batches the final batch is
/// shortened, keeping acquisition and random picks as balanced as possible.
pub fn optimize<F, E>(
    objective: F,
    bounds: &Bounds,
    budget: usize,
    seed: u64,
    config: &SmacConfig,
    observer: &mut dyn Observer,
) -> Result<SmacResult, SmacError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Into<BoxError> + Send,
{
    if budget < config.min_budget() {
        return Err(SmacError::Budget { budget, min: config.min_budget() });
    }
    if config.proposal.batch_size() == 0 {
        return Err(SmacError::Proposal("batch size is zero".into()));
    }
    let mut history = RunHistory::default();

    let mut rng = child_rng(seed, stream::INITIAL_DESIGN, 0);
    let initial: Vec<(Vec<f64>, Origin)> =
        (0..config.n_initial).map(|_| (bounds.sample(&mut rng), Origin::Initial)).collect();
    let batch = evaluate_batch(&objective, initial, 0)?;
    observer.on_batch(0, &batch);
    batch.into_iter().for_each(|e| history.push(e));

    let mut iteration = 0u32;
    while history.len() < budget {
        iteration += 1;
        let forest =
            fit_forest(&history, derive_seed(seed, stream::FOREST, iteration as u64), &config.forest)?;
        let candidates = propose_candidates(
            &forest,
            &history,
            bounds,
            derive_seed(seed, stream::PROPOSAL, iteration as u64),
            &config.proposal,
        )?;
        let room = budget - history.len();
        let batch = truncate_batch(candidates, room, &config.proposal);
        let batch =
            evaluate_batch(&objective, batch.into_iter().map(|c| (c.theta, c.origin)).collect(), iteration)?;
        observer.on_batch(iteration, &batch);
        batch.into_iter().for_each(|e| history.push(e));
    }

    let best = history.best().expect("budget is positive").clone();
    Ok(SmacResult { best_theta: best.theta, best_value: best.value, history })
}

fn truncate_batch(candidates: Vec<Candidate>, room: usize, config: &ProposalConfig) -> Vec<Candidate> {
    if room >= candidates.len() {
        return candidates;
    }
    let n_acq = room.div_ceil(2).min(config.n_acquisition);
    let n_rand = room - n_acq;
    let (acq, rand): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|c| c.origin == Origin::Acquisition);
    acq.into_iter().take(n_acq).chain(rand.into_iter().take(n_rand)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn sphere(x: &[f64]) -> Result<f64, Infallible> {
        Ok(-x.iter().map(|v| v * v).sum::<f64>())
    }

    #[test]
    fn budget_is_spent_exactly() {
        let bounds = Bounds::uniform(3, -5.0, 5.0).unwrap();
        for budget in [20, 25, 37] {
            let r = optimize(sphere, &bounds, budget, 1, &SmacConfig::default(), &mut NoObserver).unwrap();
            assert_eq!(r.history.len(), budget);
            assert!(r.history.entries().iter().all(|e| bounds.contains(&e.theta)));
        }
    }

    #[test]
    fn small_budget_rejected() {
        let bounds = Bounds::uniform(3, -5.0, 5.0).unwrap();
        let r = optimize(sphere, &bounds, 19, 1, &SmacConfig::default(), &mut NoObserver);
        assert!(matches!(r, Err(SmacError::Budget { budget: 19, min: 20 })));
    }

    #[test]
    fn batches_have_fixed_composition() {
        let bounds = Bounds::uniform(14, -5.0, 5.0).unwrap();
        let mut batches = Vec::new();
        let mut obs = |it: u32, b: &[HistoryEntry]| batches.push((it, b.to_vec()));
        let r = optimize(sphere, &bounds, 60, 2, &SmacConfig::default(), &mut obs).unwrap();
        assert_eq!(batches.len(), 6);
        assert!(batches[0].1.iter().all(|e| e.origin == Origin::Initial));
        for (it, b) in &batches[1..] {
            assert_eq!(b.len(), 10);
            assert_eq!(b.iter().filter(|e| e.origin == Origin::Random).count(), 5);
            assert!(b.iter().all(|e| e.iteration == *it));
        }
        let flat: Vec<HistoryEntry> = batches.into_iter().flat_map(|b| b.1).collect();
        assert_eq!(flat, r.history.entries());
    }

    #[test]
    fn incumbent_is_best_and_earliest() {
        let bounds = Bounds::uniform(2, 0.0, 1.0).unwrap();
        // Constant objective: every entry ties, so the first wins.
        let r = optimize(
            |_: &[f64]| Ok::<_, Infallible>(1.0),
            &bounds,
            20,
            3,
            &SmacConfig::default(),
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(r.best_theta, r.history.entries()[0].theta);
        let trace = r.history.incumbent_trace();
        assert!(trace.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn deterministic_given_seed() {
        let bounds = Bounds::uniform(14, -5.0, 5.0).unwrap();
        let a = optimize(sphere, &bounds, 50, 9, &SmacConfig::default(), &mut NoObserver).unwrap();
        let b = optimize(sphere, &bounds, 50, 9, &SmacConfig::default(), &mut NoObserver).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objective_errors_carry_theta() {
        let bounds = Bounds::uniform(2, 0.0, 1.0).unwrap();
        let r = optimize(
            |x: &[f64]| if x[0] > 0.5 { Err("boom") } else { Ok(0.0) },
            &bounds,
            20,
            4,
            &SmacConfig::default(),
            &mut NoObserver,
        );
        match r {
            Err(SmacError::Objective { theta, source }) => {
                assert!(theta[0] > 0.5);
                assert_eq!(source.to_string(), "boom");
            }
            other => panic!("{other:?}"),
        }
        let r = optimize(
            |_: &[f64]| Ok::<_, Infallible>(f64::NAN),
            &bounds,
            20,
            4,
            &SmacConfig::default(),
            &mut NoObserver,
        );
        assert!(matches!(r, Err(SmacError::NonFinite { .. })));
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![0.0], vec![-1.0]).is_err());
        assert!(Bounds::new(vec![], vec![]).is_err());
        assert!(Bounds::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert_eq!(Bounds::policy().dims(), 14);
    }
}
