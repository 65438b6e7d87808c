//! Random regression forest whose leaves keep their training values.
//!
//! Prediction pools the raw values of the leaves reached in every tree and
//! returns their mean and population variance.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RunHistory, SmacError};
use crate::rng::{child_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Inputs with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        values: Vec<f64>,
    },
}

impl TreeNode {
    pub fn leaf(values: Vec<f64>) -> Self {
        TreeNode::Leaf { values }
    }

    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split { feature, threshold, left: Box::new(left), right: Box::new(right) }
    }

    pub fn leaf_values(&self, x: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { values } => return values,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Visit every leaf's values.
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&[f64])) {
        match self {
            TreeNode::Leaf { values } => f(values),
            TreeNode::Split { left, right, .. } => {
                left.for_each_leaf(f);
                right.for_each_leaf(f);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mu: f64,
    pub sigma2: f64,
}

impl Prediction {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// A node is split only if it holds at least this many examples.
    pub min_split: usize,
    /// Fraction of input dimensions eligible at each split.
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 10, min_split: 10, feature_fraction: 5.0 / 6.0, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn features_per_split(&self, dims: usize) -> usize {
        ((self.feature_fraction * dims as f64 - 1e-9).ceil() as usize).clamp(1, dims.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<TreeNode>,
}

impl Forest {
    pub fn from_trees(trees: Vec<TreeNode>) -> Self {
        assert!(!trees.is_empty(), "a forest needs at least one tree");
        Self { trees }
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    /// Mean and population variance of the union of reached-leaf values.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut n = 0usize;
        let mut sum = 0.0;
        for tree in &self.trees {
            let values = tree.leaf_values(x);
            n += values.len();
            sum += values.iter().sum::<f64>();
        }
        let mu = sum / n as f64;
        let mut ss = 0.0;
        for tree in &self.trees {
            ss += tree.leaf_values(x).iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
        }
        Prediction { mu, sigma2: ss / n as f64 }
    }
}

/// Grow a forest on the run history.
pub fn fit_forest(history: &RunHistory, rng_seed: u64, config: &ForestConfig) -> Result<Forest, SmacError> {
    let entries = history.entries();
    if entries.is_empty() {
        return Err(SmacError::Fit("cannot fit a forest to an empty history".into()));
    }
    if config.n_trees == 0 {
        return Err(SmacError::Fit("forest needs at least one tree".into()));
    }
    let dims = entries[0].theta.len();
    if entries.iter().any(|e| e.theta.len() != dims) {
        return Err(SmacError::Fit("history entries have mixed dimensionality".into()));
    }
    let xs: Vec<&[f64]> = entries.iter().map(|e| e.theta.as_slice()).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.value).collect();
    let data = Data { xs: &xs, ys: &ys, dims };

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = child_rng(rng_seed, stream::FOREST, t as u64);
            let n = ys.len();
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&data, idx, config, &mut rng)
        })
        .collect();
    Ok(Forest { trees })
}

struct Data<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [f64],
    dims: usize,
}

fn grow<R: Rng>(data: &Data<'_>, idx: Vec<usize>, config: &ForestConfig, rng: &mut R) -> TreeNode {
    let values = || idx.iter().map(|&i| data.ys[i]).collect::<Vec<_>>();
    if idx.len() < config.min_split || data.dims == 0 {
        return TreeNode::leaf(values());
    }
    let first = data.ys[idx[0]];
    if idx.iter().all(|&i| data.ys[i] == first) {
        return TreeNode::leaf(values());
    }

    let k = config.features_per_split(data.dims);
    let features = sample(rng, data.dims, k);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
    for feature in features.iter() {
        column.clear();
        column.extend(idx.iter().map(|&i| (data.xs[i][feature], data.ys[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let total: f64 = column.iter().map(|c| c.1).sum();
        let total_sq: f64 = column.iter().map(|c| c.1 * c.1).sum();
        let n = column.len() as f64;
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for i in 1..column.len() {
            sum_l += column[i - 1].1;
            sq_l += column[i - 1].1 * column[i - 1].1;
            if column[i - 1].0 == column[i].0 {
                continue;
            }
            let nl = i as f64;
            let nr = n - nl;
            let sum_r = total - sum_l;
            let sse = (sq_l - sum_l * sum_l / nl) + ((total_sq - sq_l) - sum_r * sum_r / nr);
            if best.is_none_or(|(b, _, _)| sse < b) {
                let (lo, hi) = (column[i - 1].0, column[i].0);
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some((sse, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return TreeNode::leaf(values());
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| data.xs[i][feature] <= threshold);
    debug_assert!(!left.is_empty() && !right.is_empty());
    TreeNode::split(feature, threshold, grow(data, left, config, rng), grow(data, right, config, rng))
}
