//! Command-line orchestration for the SDOH pipeline.
//!
//! Each command reads the artifacts of the stages it depends on from the
//! output directory, writes its own, and records both in `manifest.json`.

pub mod config;
pub mod manifest;
pub mod report;
pub mod stages;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{BackendKind, Overrides, PipelineConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact {artifact}; run `sdoh {command}` first")]
    Dependency { artifact: String, command: String },
    #[error("upstream artifact {artifact} changed since it was recorded; re-run `sdoh {command}`")]
    Stale { artifact: String, command: String },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    sdoh_core::corpus::CorpusError,
    sdoh_core::llm::GatewayError,
    sdoh_core::thematic::ThematicError,
    sdoh_core::rag::RagError,
    sdoh_core::features::FeatureError,
    sdoh_core::models::ModelError,
    sdoh_core::control::ControlError,
    serde_json::Error
);

#[derive(Debug, Parser)]
#[command(name = "sdoh", version, about = "SDOH extraction, A1C regression and diabetes-control evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true, value_parser = ["sdoh", "labs", "combined"])]
    pub feature_set: Option<String>,
    #[arg(long, global = true, value_parser = ["ridge", "lasso", "rf", "gbt", "all"])]
    pub model: Option<String>,
    /// Worker threads for backend calls and tree fitting.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Existing corpus directory (patients.csv + transcripts/).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted signal.
    Synth,
    /// Extract theme codes and cluster them into risk factors.
    Themes,
    /// Summarise factors and rate the 15 subtopics for every patient.
    Rate,
    /// Assemble, impute, split and scale the feature sets.
    Features,
    /// Grid-search and fit the regression models.
    Train,
    /// Redact A1C, predict control levels and score them.
    Control,
    /// Render coverage, R², importance and accuracy tables.
    Report,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            backend: self.backend,
            out: self.out.clone(),
            corpus: self.corpus.clone(),
            parallel: self.parallel,
            feature_set: self.feature_set.clone(),
            model: self.model.clone(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides())?;
    if cfg.parallel > 1 {
        // a pool may already exist when called from tests; that is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallel).build_global();
    }
    let mut ctx = stages::Context::open(cfg)?;
    match cli.command {
        Command::Synth => stages::synth(&mut ctx)?,
        Command::Themes => stages::themes(&mut ctx)?,
        Command::Rate => stages::rate(&mut ctx)?,
        Command::Features => stages::features(&mut ctx)?,
        Command::Train => stages::train(&mut ctx)?,
        Command::Control => stages::control(&mut ctx)?,
        Command::Report => report::report(&mut ctx)?,
    }
    ctx.save()
}
