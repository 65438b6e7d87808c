//! Candidate generation: local search on GEI from the best observed points,
//! plus a large uniform random pool.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::generalized_expected_improvement;
use super::forest::Forest;
use super::{Bounds, Origin, RunHistory, SmacError};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    /// Candidates chosen by acquisition value.
    pub n_acquisition: usize,
    /// Candidates sampled uniformly from the random pool.
    pub n_random: usize,
    pub random_pool: usize,
    pub local_starts: usize,
    /// Neighbor step, as a fraction of each coordinate's range.
    pub neighborhood: f64,
    pub max_local_steps: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            n_acquisition: 5,
            n_random: 5,
            random_pool: 10_000,
            local_starts: 10,
            neighborhood: 0.05,
            max_local_steps: 100,
        }
    }
}

impl ProposalConfig {
    pub fn batch_size(&self) -> usize {
        self.n_acquisition + self.n_random
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub theta: Vec<f64>,
    pub origin: Origin,
    pub gei: f64,
}

fn key(theta: &[f64]) -> Vec<u64> {
    // Normalize -0.0 so equal points hash equally.
    theta.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn gei(forest: &Forest, theta: &[f64], f_max: f64) -> f64 {
    let p = forest.predict(theta);
    generalized_expected_improvement(p.mu, p.sigma(), f_max)
}

/// First-improvement hill climbing over single-coordinate moves.
pub fn local_search(
    forest: &Forest,
    start: &[f64],
    bounds: &Bounds,
    f_max: f64,
    config: &ProposalConfig,
) -> (Vec<f64>, f64) {
    let mut x = bounds.clamp(start);
    let mut best = gei(forest, &x, f_max);
    for _ in 0..config.max_local_steps {
        let mut moved = false;
        'scan: for d in 0..bounds.dims() {
            let step = config.neighborhood * bounds.width(d);
            if step <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let old = x[d];
                let new = (old + dir * step).clamp(bounds.lower[d], bounds.upper[d]);
                if new == old {
                    continue;
                }
                x[d] = new;
                let g = gei(forest, &x, f_max);
                if g > best {
                    best = g;
                    moved = true;
                    break 'scan;
                }
                x[d] = old;
            }
        }
        if !moved {
            break;
        }
    }
    (x, best)
}

/// Propose the next batch of thetas to evaluate.
///
/// Points already present in the history are never proposed again.
pub fn propose_candidates(
    forest: &Forest,
    history: &RunHistory,
    bounds: &Bounds,
    rng_seed: u64,
    config: &ProposalConfig,
) -> Result<Vec<Candidate>, SmacError> {
    let f_max = history.best().ok_or_else(|| SmacError::Proposal("history is empty".into()))?.value;
    if config.random_pool < config.n_random {
        return Err(SmacError::Proposal("random pool smaller than random draw".into()));
    }
    let mut rng: ChaCha8Rng = seeded_rng(rng_seed);

    let mut seen: HashSet<Vec<u64>> = history.entries().iter().map(|e| key(&e.theta)).collect();

    // Pool entries: (theta, gei, from_random_pool).
    let mut pool: Vec<(Vec<f64>, f64, bool)> = Vec::with_capacity(config.local_starts + config.random_pool);
    for start in history.top_k(config.local_starts) {
        let (x, g) = local_search(forest, &start.theta, bounds, f_max, config);
        if seen.insert(key(&x)) {
            pool.push((x, g, false));
        }
    }
    let randoms: Vec<Vec<f64>> = (0..config.random_pool).map(|_| bounds.sample(&mut rng)).collect();
    for x in randoms {
        if seen.insert(key(&x)) {
            let g = gei(forest, &x, f_max);
            pool.push((x, g, true));
        }
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    // Stable: equal GEI keeps pool order (local-search results first).
    order.sort_by(|&a, &b| pool[b].1.total_cmp(&pool[a].1));
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::with_capacity(config.batch_size());
    for &i in order.iter().take(config.n_acquisition) {
        taken[i] = true;
        out.push(Candidate { theta: pool[i].0.clone(), origin: Origin::Acquisition, gei: pool[i].1 });
    }

    let remaining: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].2 && !taken[i]).collect();
    if remaining.len() < config.n_random {
        return Err(SmacError::Proposal("not enough distinct random candidates".into()));
    }
    for j in sample(&mut rng, remaining.len(), config.n_random).iter() {
        let i = remaining[j];
        out.push(Candidate { theta: pool[i].0.clone(), origin: Origin::Random, gei: pool[i].1 });
    }
    Ok(out)
}
