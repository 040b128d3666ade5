//! From-scratch regressors: ridge, lasso, random forest and gradient-boosted
//! trees, with R², grid-search cross-validation and impurity importance.

mod cv;
mod ensemble;
mod linear;
mod tree;

pub use cv::{default_grid, fold_assignment, grid_search_cv, r2_score, CvResult, GridPoint};
pub use ensemble::{feature_importance, fit_gradient_boosting, fit_random_forest, ImportanceReport};
pub use linear::{fit_lasso, fit_ridge, lasso_kkt_violation, lasso_lambda_max, LinearFit};
pub use tree::{best_split, fit_tree, Node, SplitChoice, TreeParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("R² is undefined for a constant target")]
    ConstantTarget,
    #[error("schema mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    Schema { missing: Vec<String>, extra: Vec<String> },
    #[error("feature importance needs a tree model, got {0}")]
    NotATreeModel(&'static str),
    #[error("model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Lasso,
    RandomForest,
    GradientBoosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::Ridge, ModelKind::Lasso, ModelKind::RandomForest, ModelKind::GradientBoosting];

    /// Short name used on the command line and in file names.
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::RandomForest => "rf",
            ModelKind::GradientBoosting => "gbt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "Ridge Regression",
            ModelKind::Lasso => "Lasso Regression",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::GradientBoosting => "Gradient Boosting",
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(self, ModelKind::RandomForest | ModelKind::GradientBoosting)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown model {s:?}")))
    }
}

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCount {
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureCount {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            FeatureCount::Sqrt => (p as f64).sqrt().round() as usize,
            FeatureCount::All => p,
            FeatureCount::Fixed(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureCount,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_samples_leaf: 1, features_per_split: FeatureCount::Sqrt, bootstrap: true, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self { n_rounds: 100, learning_rate: 0.1, max_depth: Some(3), min_samples_leaf: 1, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    RandomForest(ForestParams),
    GradientBoosting(BoostParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Ridge { .. } => ModelKind::Ridge,
            ModelSpec::Lasso { .. } => ModelKind::Lasso,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::GradientBoosting(_) => ModelKind::GradientBoosting,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        match *self {
            ModelSpec::Ridge { lambda } | ModelSpec::Lasso { lambda } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad("lambda must be finite and ≥ 0");
                }
            }
            ModelSpec::RandomForest(p) => {
                if p.n_trees == 0 || p.min_samples_leaf == 0 || p.max_depth == Some(0) {
                    return bad("forest counts must be ≥ 1");
                }
                if p.features_per_split == FeatureCount::Fixed(0) {
                    return bad("features_per_split must be ≥ 1");
                }
            }
            ModelSpec::GradientBoosting(p) => {
                if p.min_samples_leaf == 0 || p.max_depth == Some(0) {
                    return bad("boosting counts must be ≥ 1");
                }
                if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    return bad("learning_rate must lie in (0, 1]");
                }
            }
        }
        Ok(())
    }

    /// Compact human-readable hyperparameters.
    pub fn describe(&self) -> String {
        let depth = |d: Option<usize>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            ModelSpec::Ridge { lambda } | ModelSpec::Lasso { lambda } => format!("lambda={lambda}"),
            ModelSpec::RandomForest(p) => format!(
                "n_trees={} max_depth={} min_samples_leaf={} features_per_split={:?}",
                p.n_trees,
                depth(p.max_depth),
                p.min_samples_leaf,
                p.features_per_split
            ),
            ModelSpec::GradientBoosting(p) => format!(
                "n_rounds={} learning_rate={} max_depth={} min_samples_leaf={}",
                p.n_rounds,
                p.learning_rate,
                depth(p.max_depth),
                p.min_samples_leaf
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Params {
    Linear(LinearFit),
    Forest { trees: Vec<Node> },
    Boosted { base: f64, learning_rate: f64, trees: Vec<Node> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub params: Params,
}

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Artifact {
    format_version: u32,
    model: FittedModel,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::InvalidInput(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(ModelError::InvalidInput("need at least 2 rows".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(ModelError::InvalidInput("rows have different lengths".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidInput("non-finite value".into()));
    }
    Ok(p)
}

/// Fits `spec` on rows `x` whose columns are named `columns`.
pub fn fit(spec: &ModelSpec, columns: &[String], x: &[Vec<f64>], y: &[f64], parallel: bool) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    let p = check_xy(x, y)?;
    if p != columns.len() {
        return Err(ModelError::InvalidInput(format!("{} columns named for {p}-wide rows", columns.len())));
    }
    let params = match *spec {
        ModelSpec::Ridge { lambda } => Params::Linear(fit_ridge(x, y, lambda)?),
        ModelSpec::Lasso { lambda } => Params::Linear(fit_lasso(x, y, lambda)?),
        ModelSpec::RandomForest(p) => Params::Forest { trees: fit_random_forest(x, y, &p, parallel)? },
        ModelSpec::GradientBoosting(p) => {
            let (base, trees) = fit_gradient_boosting(x, y, &p)?;
            Params::Boosted { base, learning_rate: p.learning_rate, trees }
        }
    };
    Ok(FittedModel { spec: *spec, columns: columns.to_vec(), params })
}

impl FittedModel {
    /// Predicts rows laid out in the training column order.
    pub fn predict_rows(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_one(r)).collect()
    }

    fn predict_one(&self, row: &[f64]) -> f64 {
        match &self.params {
            Params::Linear(f) => f.predict_one(row),
            Params::Forest { trees } => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
            Params::Boosted { base, learning_rate, trees } => {
                base + trees.iter().map(|t| learning_rate * t.predict(row)).sum::<f64>()
            }
        }
    }

    /// Predicts rows whose columns are named `columns`, in any order.
    pub fn predict(&self, columns: &[String], x: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let missing: Vec<String> = self.columns.iter().filter(|c| !columns.contains(c)).cloned().collect();
        let extra: Vec<String> = columns.iter().filter(|c| !self.columns.contains(c)).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() || columns.len() != self.columns.len() {
            return Err(ModelError::Schema { missing, extra });
        }
        let order: Vec<usize> =
            self.columns.iter().map(|c| columns.iter().position(|k| k == c).unwrap()).collect();
        if x.iter().any(|r| r.len() != columns.len()) {
            return Err(ModelError::InvalidInput("row width differs from column count".into()));
        }
        Ok(x.iter().map(|r| self.predict_one(&order.iter().map(|&i| r[i]).collect::<Vec<_>>())).collect())
    }

    pub fn to_json(&self) -> String {
        let artifact = Artifact { format_version: ARTIFACT_VERSION, model: self.clone() };
        serde_json::to_string_pretty(&artifact).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let artifact: Artifact = serde_json::from_str(text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if artifact.format_version != ARTIFACT_VERSION {
            return Err(ModelError::Artifact(format!("unsupported format_version {}", artifact.format_version)));
        }
        Ok(artifact.model)
    }
}
