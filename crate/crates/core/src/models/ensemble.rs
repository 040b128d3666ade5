//! Random forest, squared-loss gradient boosting and impurity importance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Node, TreeParams};
use super::{check_xy, mean, BoostParams, FittedModel, ForestParams, ModelError, Params};

/// Each tree draws its bootstrap and feature subsets from its own seeded
/// stream, so parallel and sequential fits are bit-identical.
pub fn fit_random_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams, parallel: bool) -> Result<Vec<Node>, ModelError> {
    let p = check_xy(x, y)?;
    if params.n_trees == 0 || params.min_samples_leaf == 0 {
        return Err(ModelError::Config("n_trees and min_samples_leaf must be ≥ 1".into()));
    }
    let n = x.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.features_per_split.resolve(p),
    };
    let grow = |t: usize| {
        let mut rng = crate::seed::stream_rng(params.seed, &format!("{}/{t}", crate::seed::BOOTSTRAP));
        let idx: Vec<usize> =
            if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
        fit_tree(x, y, &idx, &tree_params, &mut rng)
    };
    Ok(if parallel {
        (0..params.n_trees).into_par_iter().map(grow).collect()
    } else {
        (0..params.n_trees).map(grow).collect()
    })
}

/// F₀ = mean(y); each round fits a tree to the current residuals and adds
/// learning_rate × tree. Returns (F₀, trees).
pub fn fit_gradient_boosting(x: &[Vec<f64>], y: &[f64], params: &BoostParams) -> Result<(f64, Vec<Node>), ModelError> {
    let p = check_xy(x, y)?;
    let base = mean(y);
    let n = x.len();
    let tree_params = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features: p };
    // all features are candidates, so the stream is never drawn from
    let mut rng = crate::seed::stream_rng(params.seed, "boosting");
    let idx: Vec<usize> = (0..n).collect();
    let mut current = vec![base; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let resid: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let tree = fit_tree(x, &resid, &idx, &tree_params, &mut rng);
        for (f, row) in current.iter_mut().zip(x) {
            *f += params.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok((base, trees))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    /// Normalised to sum to 1, or all zero when no tree split.
    pub importance: Vec<f64>,
    pub zero_splits: bool,
}

impl ImportanceReport {
    /// (rank, feature, importance), most important first; ties by name.
    pub fn ranked(&self) -> Vec<(usize, String, f64)> {
        let mut v: Vec<(String, f64)> = self.features.iter().cloned().zip(self.importance.iter().copied()).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.into_iter().enumerate().map(|(i, (f, w))| (i + 1, f, w)).collect()
    }
}

/// Variance-reduction importance summed over all trees, normalised.
pub fn feature_importance(model: &FittedModel) -> Result<ImportanceReport, ModelError> {
    let trees = match &model.params {
        Params::Forest { trees } | Params::Boosted { trees, .. } => trees,
        Params::Linear(_) => return Err(ModelError::NotATreeModel(model.spec.kind().as_str())),
    };
    let mut acc = vec![0.0; model.columns.len()];
    for t in trees {
        t.accumulate_importance(&mut acc);
    }
    let total: f64 = acc.iter().sum();
    let zero_splits = total <= 0.0;
    if !zero_splits {
        acc.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ImportanceReport { features: model.columns.clone(), importance: acc, zero_splits })
}
