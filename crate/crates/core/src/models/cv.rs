//! R², seeded k-fold assignment and grid search.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, mean, BoostParams, FeatureCount, FittedModel, ForestParams, ModelError, ModelKind, ModelSpec};

/// 1 − RSS/TSS with TSS taken about mean(y).
pub fn r2_score(y: &[f64], pred: &[f64]) -> Result<f64, ModelError> {
    if y.len() != pred.len() || y.len() < 2 {
        return Err(ModelError::InvalidInput(format!("need ≥ 2 paired values, got {} and {}", y.len(), pred.len())));
    }
    let m = mean(y);
    let tss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if tss == 0.0 {
        return Err(ModelError::ConstantTarget);
    }
    let rss: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

/// Fold label per row: a seeded permutation dealt round-robin, so fold
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if k < 2 {
        return Err(ModelError::Config(format!("need at least 2 folds, got {k}")));
    }
    if n / k < 2 {
        return Err(ModelError::Config(format!("{n} rows cannot fill {k} folds with ≥ 2 rows each")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut crate::seed::stream_rng(seed, crate::seed::FOLDS));
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: ModelSpec,
    pub fold_scores: Vec<f64>,
    pub mean_cv_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_index: usize,
    pub best: GridPoint,
    pub train_r2: f64,
    pub grid: Vec<GridPoint>,
    pub model: FittedModel,
}

fn rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

fn score_point(
    spec: &ModelSpec,
    columns: &[String],
    x: &[Vec<f64>],
    y: &[f64],
    folds: &[usize],
    k: usize,
    parallel: bool,
) -> Result<GridPoint, ModelError> {
    let mut fold_scores = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..x.len()).filter(|&i| folds[i] == f).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = fit(spec, columns, &rows(x, &train), &ty, parallel)?;
        let hy: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        fold_scores.push(r2_score(&hy, &model.predict_rows(&rows(x, &held)))?);
    }
    let mean_cv_r2 = mean(&fold_scores);
    Ok(GridPoint { spec: *spec, fold_scores, mean_cv_r2 })
}

/// Scores every grid point by mean held-out R², keeps the best (first on
/// ties) and refits it on all rows.
pub fn grid_search_cv(
    columns: &[String],
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[ModelSpec],
    n_folds: usize,
    seed: u64,
    parallel: bool,
) -> Result<CvResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::Config("hyperparameter grid is empty".into()));
    }
    for spec in grid {
        spec.validate()?;
    }
    let folds = fold_assignment(x.len(), n_folds, seed)?;
    let scored: Result<Vec<GridPoint>, ModelError> = if parallel {
        grid.par_iter().map(|s| score_point(s, columns, x, y, &folds, n_folds, true)).collect()
    } else {
        grid.iter().map(|s| score_point(s, columns, x, y, &folds, n_folds, false)).collect()
    };
    let scored = scored?;
    let mut best_index = 0;
    for (i, g) in scored.iter().enumerate() {
        if g.mean_cv_r2 > scored[best_index].mean_cv_r2 {
            best_index = i;
        }
    }
    let best = scored[best_index].clone();
    let model = fit(&best.spec, columns, x, y, parallel)?;
    let train_r2 = r2_score(y, &model.predict_rows(x))?;
    Ok(CvResult { best_index, best, train_r2, grid: scored, model })
}

/// Default search grids; tree grids carry `seed`.
pub fn default_grid(kind: ModelKind, seed: u64) -> Vec<ModelSpec> {
    const LAMBDAS: [f64; 5] = [0.001, 0.01, 0.1, 1.0, 10.0];
    match kind {
        ModelKind::Ridge => LAMBDAS.iter().map(|&lambda| ModelSpec::Ridge { lambda }).collect(),
        ModelKind::Lasso => LAMBDAS.iter().map(|&lambda| ModelSpec::Lasso { lambda }).collect(),
        ModelKind::RandomForest => {
            let mut g = Vec::new();
            for n_trees in [100, 300] {
                for max_depth in [Some(3), Some(5), None] {
                    for features_per_split in [FeatureCount::Sqrt, FeatureCount::All] {
                        g.push(ModelSpec::RandomForest(ForestParams {
                            n_trees,
                            max_depth,
                            min_samples_leaf: 1,
                            features_per_split,
                            bootstrap: true,
                            seed,
                        }));
                    }
                }
            }
            g
        }
        ModelKind::GradientBoosting => {
            let mut g = Vec::new();
            for n_rounds in [50, 200] {
                for learning_rate in [0.05, 0.1] {
                    for max_depth in [Some(2), Some(3)] {
                        g.push(ModelSpec::GradientBoosting(BoostParams {
                            n_rounds,
                            learning_rate,
                            max_depth,
                            min_samples_leaf: 1,
                            seed,
                        }));
                    }
                }
            }
            g
        }
    }
}
