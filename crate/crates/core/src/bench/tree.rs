//! CART-style regression tree plus the boosted and bagged ensembles built
//! on it. Splits greedily minimize within-node squared error; thresholds sit
//! at midpoints of consecutive distinct sorted feature values.

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { max_depth: 8, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub root: Node,
    pub options: TreeOptions,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }
}

pub fn tree_fit(x: &[Vec<f64>], y: &[f64], options: TreeOptions) -> Result<RegressionTree> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput(format!(
            "tree needs matching non-empty x ({}) and y ({})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < options.min_leaf {
        return Err(Error::EmptyInput(format!(
            "{} samples, need at least min_leaf = {}",
            x.len(),
            options.min_leaf
        )));
    }
    let idx: Vec<usize> = (0..x.len()).collect();
    let root = grow(x, y, &idx, 0, &options);
    Ok(RegressionTree { root, options })
}

fn mean_of(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &[usize], depth: usize, opts: &TreeOptions) -> Node {
    let leaf = || Node::Leaf { value: mean_of(y, idx) };
    if depth >= opts.max_depth || idx.len() < 2 * opts.min_leaf {
        return leaf();
    }
    let first = y[idx[0]];
    if idx.iter().all(|&i| y[i] == first) {
        return leaf(); // constant target
    }
    let Some((feature, threshold)) = best_split(x, y, idx, opts.min_leaf) else {
        return leaf();
    };
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &i in idx {
        if x[i][feature] < threshold {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, &left, depth + 1, opts)),
        right: Box::new(grow(x, y, &right, depth + 1, opts)),
    }
}

/// Scan every feature's midpoint thresholds; return the (feature, threshold)
/// with the lowest total child SSE. Ties keep the earliest feature and the
/// lowest threshold.
fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let p = x[idx[0]].len();
    let n = idx.len();
    let mut best: Option<(f64, usize, f64)> = None;

    let total_sum: f64 = idx.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature in 0..p {
        order.clear();
        order.extend_from_slice(idx);
        order.sort_by(|&a, &b| {
            x[a][feature].partial_cmp(&x[b][feature]).expect("finite feature")
        });

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 1..n {
            let prev = order[k - 1];
            left_sum += y[prev];
            left_sq += y[prev] * y[prev];
            let (v_prev, v_here) = (x[prev][feature], x[order[k]][feature]);
            if v_prev == v_here {
                continue; // no boundary between equal values
            }
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / k as f64)
                + (right_sq - right_sum * right_sum / (n - k) as f64);
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, feature, 0.5 * (v_prev + v_here)));
            }
        }
    }
    match best {
        Some((sse, feature, threshold)) if sse < parent_sse - 1e-12 => Some((feature, threshold)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Gradient boosting on squared loss
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostOptions {
    pub rounds: usize,
    pub shrinkage: f64,
    pub tree: TreeOptions,
}

impl Default for BoostOptions {
    fn default() -> Self {
        BoostOptions {
            rounds: 100,
            shrinkage: 0.1,
            tree: TreeOptions { max_depth: 3, min_leaf: 5 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoostedTrees {
    pub base: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedTrees {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

/// Squared-loss gradient boosting: start from mean(y), fit each round's tree
/// to the current residuals, add it scaled by the shrinkage.
pub fn boosted_fit(x: &[Vec<f64>], y: &[f64], options: BoostOptions) -> Result<BoostedTrees> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput("boosted fit".into()));
    }
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut residuals: Vec<f64> = y.iter().map(|&v| v - base).collect();
    let mut trees = Vec::with_capacity(options.rounds);
    for _ in 0..options.rounds {
        let tree = tree_fit(x, &residuals, options.tree)?;
        for (r, row) in residuals.iter_mut().zip(x.iter()) {
            *r -= options.shrinkage * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(BoostedTrees { base, shrinkage: options.shrinkage, trees })
}

// ---------------------------------------------------------------------------
// Bagging
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BagOptions {
    pub rounds: usize,
    /// Full-size bootstrap resampling; with this off every tree sees the
    /// whole sample (useful only for equivalence checks).
    pub bootstrap: bool,
    pub tree: TreeOptions,
}

impl Default for BagOptions {
    fn default() -> Self {
        BagOptions { rounds: 100, bootstrap: true, tree: TreeOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct BaggedTrees {
    pub trees: Vec<RegressionTree>,
}

impl BaggedTrees {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bootstrap-aggregated trees, deterministic given the seed.
pub fn bagged_fit(x: &[Vec<f64>], y: &[f64], options: BagOptions, seed: u64) -> Result<BaggedTrees> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyInput("bagged fit".into()));
    }
    let n = x.len();
    let mut rng = rng_from_seed(seed);
    let mut trees = Vec::with_capacity(options.rounds);
    for _ in 0..options.rounds {
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = if options.bootstrap {
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                xs.push(x[i].clone());
                ys.push(y[i]);
            }
            (xs, ys)
        } else {
            (x.to_vec(), y.to_vec())
        };
        trees.push(tree_fit(&xs, &ys, options.tree)?);
    }
    Ok(BaggedTrees { trees })
}
