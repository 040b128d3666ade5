//! CART regression trees: greedy binary splits minimising the summed squared
//! error of the two children; leaves predict the mean.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        n_samples: usize,
        /// Parent SSE minus the children's SSE.
        impurity_decrease: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Adds each split's impurity decrease to `acc[feature]`.
    pub fn accumulate_importance(&self, acc: &mut [f64]) {
        if let Node::Split { feature, impurity_decrease, left, right, .. } = self {
            acc[*feature] += impurity_decrease;
            left.accumulate_importance(acc);
            right.accumulate_importance(acc);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; the full set when ≥ p.
    pub max_features: usize,
}

/// The chosen split at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Summed squared error of the two children.
    pub criterion: f64,
}

fn sse(y: &[f64], idx: &[usize]) -> f64 {
    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
}

/// Best split of rows `idx` over `features`: the smallest children SSE over
/// midpoints between consecutive distinct values, each side holding at least
/// `min_leaf` rows. Ties go to the lower feature, then the lower threshold.
pub fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], features: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let centre = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x[i][f], y[i] - centre)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
        let (mut s, mut sq) = (0.0, 0.0);
        for i in 0..n - 1 {
            s += pairs[i].1;
            sq += pairs[i].1 * pairs[i].1;
            let nl = i + 1;
            let nr = n - nl;
            if pairs[i].0 == pairs[i + 1].0 || nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (rs, rsq) = (total - s, total_sq - sq);
            let crit = (sq - s * s / nl as f64) + (rsq - rs * rs / nr as f64);
            if best.is_none_or(|b| crit < b.criterion) {
                let mid = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                let threshold = if mid < pairs[i + 1].0 { mid } else { pairs[i].0 };
                best = Some(SplitChoice { feature: f, threshold, criterion: crit });
            }
        }
    }
    best
}

/// Grows a tree on rows `idx` (repeats allowed, as in a bootstrap sample).
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], idx: &[usize], params: &TreeParams, rng: &mut ChaCha8Rng) -> Node {
    grow(x, y, idx.to_vec(), params, rng, 0)
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, params: &TreeParams, rng: &mut ChaCha8Rng, depth: usize) -> Node {
    let n = idx.len();
    let value = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let leaf = Node::Leaf { value, n_samples: n };
    let node_sse = sse(y, &idx);
    if node_sse <= 0.0 || params.max_depth.is_some_and(|d| depth >= d) {
        return leaf;
    }
    let p = x[0].len();
    let features: Vec<usize> = if params.max_features >= p {
        (0..p).collect()
    } else {
        let mut f = sample(rng, p, params.max_features).into_vec();
        f.sort_unstable();
        f
    };
    let Some(choice) = best_split(x, y, &idx, &features, params.min_samples_leaf) else {
        return leaf;
    };
    if choice.criterion >= node_sse - 1e-12 * node_sse {
        return leaf;
    }
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][choice.feature] <= choice.threshold);
    let impurity_decrease = (node_sse - sse(y, &left) - sse(y, &right)).max(0.0);
    Node::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        n_samples: n,
        impurity_decrease,
        left: Box::new(grow(x, y, left, params, rng, depth + 1)),
        right: Box::new(grow(x, y, right, params, rng, depth + 1)),
    }
}
