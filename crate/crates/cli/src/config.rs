//! Pipeline configuration file (TOML) and command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdoh_core::corpus::SyntheticConfig;
use sdoh_core::features::{FeatureSet, PrepConfig};
use sdoh_core::llm::{LiveConfig, MockConfig};
use sdoh_core::models::{ModelKind, ModelSpec};
use sdoh_core::rag::RagConfig;
use sdoh_core::thematic::ClusteringConfig;

use crate::CliError;

/// Environment variable holding the live backend's API key.
pub const API_KEY_ENV: &str = "SDOH_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub mock: MockConfig,
    pub live: LiveConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Mock, mock: MockConfig::default(), live: LiveConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThemesConfig {
    pub clustering: ClusteringConfig,
    /// CSV `cluster_id,factor_name`.
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_folds: usize,
    pub feature_sets: Vec<String>,
    pub models: Vec<String>,
    /// Replaces the built-in grid for a model (`ridge`, `lasso`, `rf`, `gbt`).
    pub grids: BTreeMap<String, Vec<ModelSpec>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_folds: 5,
            feature_sets: FeatureSet::ALL.iter().map(|f| f.as_str().to_string()).collect(),
            models: ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            grids: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// One accuracy table per label. With the live backend the label is the
    /// chat model name; with the mock it names an independent mock stream.
    pub models: Vec<String>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { models: vec!["gpt-4o".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Existing corpus directory; defaults to `<out>/corpus` written by `synth`.
    pub corpus: Option<PathBuf>,
    /// Rubric TOML replacing the built-in one.
    pub rubric: Option<PathBuf>,
    pub parallel: usize,
    pub backend: BackendConfig,
    pub synth: SyntheticConfig,
    pub themes: ThemesConfig,
    pub rag: RagConfig,
    pub features: PrepConfig,
    pub train: TrainConfig,
    pub control: ControlConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("run"),
            corpus: None,
            rubric: None,
            parallel: 1,
            backend: BackendConfig::default(),
            synth: SyntheticConfig::planted_signal(),
            themes: ThemesConfig::default(),
            rag: RagConfig::default(),
            features: PrepConfig::default(),
            train: TrainConfig::default(),
            control: ControlConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub feature_set: Option<String>,
    pub model: Option<String>,
}

fn config_err(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.backend {
            self.backend.kind = b;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(p) = &o.corpus {
            self.corpus = Some(p.clone());
        }
        if let Some(n) = o.parallel {
            self.parallel = n;
        }
        if let Some(f) = &o.feature_set {
            self.train.feature_sets = vec![f.clone()];
        }
        if let Some(m) = &o.model {
            self.train.models = if m == "all" {
                ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
            } else {
                vec![m.clone()]
            };
        }
    }

    /// The global seed drives every stochastic stage.
    fn propagate_seed(&mut self) {
        self.synth.seed = self.seed;
        self.features.split.seed = self.seed;
        self.backend.mock.seed = self.seed;
        for grid in self.train.grids.values_mut() {
            for spec in grid {
                match spec {
                    ModelSpec::RandomForest(p) => p.seed = self.seed,
                    ModelSpec::GradientBoosting(p) => p.seed = self.seed,
                    ModelSpec::Ridge { .. } | ModelSpec::Lasso { .. } => {}
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.parallel == 0 {
            return Err(config_err("parallel", "must be at least 1"));
        }
        for (field, path) in [("corpus", &self.corpus), ("rubric", &self.rubric), ("themes.overrides", &self.themes.overrides)] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(config_err(field, format!("{} does not exist", p.display())));
                }
            }
        }
        self.synth.validate().map_err(|e| config_err("synth", e))?;
        self.themes.clustering.validate().map_err(|e| config_err("themes.clustering", e))?;
        self.rag.validate().map_err(|e| config_err("rag", e))?;
        if self.features.imputer.k == 0 {
            return Err(config_err("features.imputer.k", "must be at least 1"));
        }
        let frac = self.features.split.test_fraction;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(config_err("features.split.test_fraction", format!("must lie in (0, 1), got {frac}")));
        }
        if self.train.n_folds < 2 {
            return Err(config_err("train.n_folds", "must be at least 2"));
        }
        self.feature_sets()?;
        self.model_kinds()?;
        for (name, grid) in &self.train.grids {
            let kind: ModelKind = name.parse().map_err(|e| config_err("train.grids", e))?;
            if grid.is_empty() {
                return Err(config_err("train.grids", format!("{name} grid is empty")));
            }
            for spec in grid {
                if spec.kind() != kind {
                    return Err(config_err("train.grids", format!("{name} grid contains a {} spec", spec.kind().as_str())));
                }
                spec.validate().map_err(|e| config_err("train.grids", e))?;
            }
        }
        if self.control.models.is_empty() {
            return Err(config_err("control.models", "list at least one model"));
        }
        for label in &self.control.models {
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(config_err("control.models", format!("{label:?} must be non-empty [A-Za-z0-9._-]")));
            }
        }
        let m = &self.backend.mock;
        for (field, p) in [
            ("backend.mock.rating_noise", m.rating_noise),
            ("backend.mock.fabrication_rate", m.fabrication_rate),
            ("backend.mock.non_response_rate", m.non_response_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(config_err(field, format!("must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>, CliError> {
        self.train
            .feature_sets
            .iter()
            .map(|s| s.parse().map_err(|e| config_err("feature_set", e)))
            .collect()
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>, CliError> {
        self.train.models.iter().map(|s| s.parse().map_err(|e| config_err("model", e))).collect()
    }

    pub fn grid(&self, kind: ModelKind) -> Vec<ModelSpec> {
        self.train
            .grids
            .get(kind.as_str())
            .cloned()
            .unwrap_or_else(|| sdoh_core::models::default_grid(kind, self.seed))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    /// Digest of the effective configuration (after overrides). The output
    /// location is left out so identical runs in different directories match.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        sdoh_core::sha256_hex(serde_json::to_string(&c).expect("config serialises"))
    }
}
