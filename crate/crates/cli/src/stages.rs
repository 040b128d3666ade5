//! One function per pipeline command.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sdoh_core::control::{accuracy_csv, confusion_matrix, evaluate_accuracy, prediction_log, run_control};
use sdoh_core::corpus::{corpus_stats, generate_synthetic_corpus, load_corpus, write_corpus, PatientRecord};
use sdoh_core::features::{assemble, feature_csv, prepare, FeatureSet, Prepared};
use sdoh_core::llm::{
    chat, embed, parse_theme_json, ChatBackend, ChatExchange, EmbeddingBackend, LiveBackend, MockBackend,
    ParseIssue, PromptRequest, TemplateName, ThemeCode,
};
use sdoh_core::models::{feature_importance, grid_search_cv, r2_score, GridPoint, ModelKind, ModelSpec};
use sdoh_core::rag::{coverage_stats, default_factors, extract_corpus, ratings_csv, RatingRecord};
use sdoh_core::thematic::{agglomerative_cluster, cluster_report_csv, consolidate, parse_overrides_csv};
use sdoh_core::RubricSet;

use crate::config::{BackendKind, PipelineConfig, API_KEY_ENV};
use crate::manifest::{RunManifest, StageRecord, StageWriter};
use crate::CliError;

pub struct Context {
    pub cfg: PipelineConfig,
    pub manifest: RunManifest,
    config_digest: String,
}

impl Context {
    pub fn open(cfg: PipelineConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
        let config_digest = cfg.digest();
        let manifest = RunManifest::open(&cfg.out, cfg.seed, &config_digest)?;
        Ok(Self { cfg, manifest, config_digest })
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    pub fn parallel(&self) -> bool {
        self.cfg.parallel > 1
    }

    pub fn writer(&self, command: &str) -> StageWriter<'_> {
        StageWriter::new(&self.cfg.out, command, &self.config_digest)
    }

    pub fn record(&mut self, stage: impl Into<String>, record: StageRecord) {
        self.manifest.stages.insert(stage.into(), record);
    }

    pub fn save(&self) -> Result<(), CliError> {
        self.manifest.save(&self.cfg.out)
    }

    /// Loads the corpus and a digest identifying it.
    pub fn corpus(&self) -> Result<(Vec<PatientRecord>, String), CliError> {
        let dir = self.cfg.corpus_dir();
        if self.cfg.corpus.is_none() {
            self.manifest.require(self.out(), "synth", "synth")?;
        } else if !dir.join("patients.csv").exists() {
            return Err(CliError::Config(format!("corpus: {} has no patients.csv", dir.display())));
        }
        let patients = load_corpus(&dir)?;
        let digest = sdoh_core::sha256_hex(serde_json::to_vec(&patients)?);
        Ok((patients, digest))
    }

    pub fn rubrics(&self) -> Result<RubricSet, CliError> {
        match &self.cfg.rubric {
            None => Ok(RubricSet::canonical()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                RubricSet::from_toml_str(&text).map_err(|e| CliError::Config(format!("rubric: {e}")))
            }
        }
    }

    /// Chat and embedding backend. `label` selects an independent stream
    /// (mock) or chat model (live) for control runs.
    pub fn backend(&self, label: Option<&str>) -> Result<Backend, CliError> {
        match self.cfg.backend.kind {
            BackendKind::Mock => {
                let mut mc = self.cfg.backend.mock.clone();
                if let Some(label) = label {
                    mc.model_id = label.to_string();
                    mc.seed = sdoh_core::seed::substream(self.cfg.seed, &format!("control/{label}"));
                }
                Ok(Backend::Mock(MockBackend::new(mc).map_err(|e| CliError::Config(format!("backend.mock: {e}")))?))
            }
            BackendKind::Live => {
                let mut lc = self.cfg.backend.live.clone();
                lc.api_key = Some(std::env::var(API_KEY_ENV).map_err(|_| {
                    CliError::Config(format!("{API_KEY_ENV} must be set to use the live backend"))
                })?);
                if let Some(label) = label {
                    lc.chat_model = label.to_string();
                }
                Ok(Backend::Live(LiveBackend::new(lc).map_err(|e| CliError::Config(format!("backend.live: {e}")))?))
            }
        }
    }
}

pub enum Backend {
    Mock(MockBackend),
    Live(LiveBackend),
}

impl Backend {
    pub fn chat(&self) -> &dyn ChatBackend {
        match self {
            Backend::Mock(m) => m,
            Backend::Live(l) => l,
        }
    }

    pub fn embedder(&self) -> &dyn EmbeddingBackend {
        match self {
            Backend::Mock(m) => m,
            Backend::Live(l) => l,
        }
    }
}

pub fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String, CliError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

// ---------------------------------------------------------------- synth

pub fn synth(ctx: &mut Context) -> Result<(), CliError> {
    let corpus = generate_synthetic_corpus(&ctx.cfg.synth)?;
    let dir = ctx.out().join("corpus");
    let tdir = dir.join("transcripts");
    if tdir.exists() {
        std::fs::remove_dir_all(&tdir).map_err(|e| CliError::io(&tdir, e))?;
    }
    write_corpus(&dir, &corpus.patients, Some(&corpus.ground_truth))?;
    let mut w = ctx.writer("synth");
    w.adopt("corpus/patients.csv")?;
    w.adopt("corpus/ground_truth.csv")?;
    for p in &corpus.patients {
        w.adopt(&format!("corpus/transcripts/{}.txt", p.patient_id))?;
    }
    w.write("corpus/stats.json", pretty(&corpus_stats(&corpus.patients)?)?)?;
    let rec = w.finish();
    ctx.record("synth", rec);
    eprintln!("synth: {} patients in {}", corpus.patients.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- themes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientThemes {
    pub patient_id: String,
    pub codes: Vec<ThemeCode>,
    pub issues: Vec<ParseIssue>,
    pub error: Option<String>,
}

pub fn themes(ctx: &mut Context) -> Result<(), CliError> {
    let (patients, corpus_digest) = ctx.corpus()?;
    let backend = ctx.backend(None)?;
    let overrides = match &ctx.cfg.themes.overrides {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
            parse_overrides_csv(&bytes).map_err(|e| CliError::Config(format!("themes.overrides: {e}")))?
        }
        None => BTreeMap::new(),
    };

    let extract = |p: &PatientRecord| -> (PatientThemes, Option<ChatExchange>) {
        let mut rec = PatientThemes { patient_id: p.patient_id.clone(), codes: Vec::new(), issues: Vec::new(), error: None };
        let req = match PromptRequest::with(TemplateName::ThemeExtraction, [("interview_text", p.transcript.text.clone())]) {
            Ok(r) => r,
            Err(e) => {
                rec.error = Some(e.to_string());
                return (rec, None);
            }
        };
        match chat(backend.chat(), &req) {
            Ok(ex) => {
                match parse_theme_json(&ex.response_text) {
                    Ok(t) => {
                        rec.codes = t.codes;
                        rec.issues = t.issues;
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
                (rec, Some(ex))
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                (rec, None)
            }
        }
    };
    let results: Vec<_> =
        if ctx.parallel() { patients.par_iter().map(extract).collect() } else { patients.iter().map(extract).collect() };

    let mut codes: Vec<String> = Vec::new();
    for (t, _) in &results {
        for c in &t.codes {
            if !codes.contains(&c.code) {
                codes.push(c.code.clone());
            }
        }
    }
    if codes.is_empty() {
        return Err(CliError::Runtime("no theme codes were extracted from any transcript".into()));
    }
    let vectors = embed(backend.embedder(), &codes)?;
    let values: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    let clusters = agglomerative_cluster(&values, &ctx.cfg.themes.clustering)?;
    let factors = consolidate(&clusters, &codes, &overrides).map_err(|e| CliError::Config(format!("themes.overrides: {e}")))?;

    let mut w = ctx.writer("themes");
    w.input_digest("corpus", corpus_digest);
    if let Some(p) = &ctx.cfg.themes.overrides {
        w.input_file("themes.overrides", p)?;
    }
    w.write("themes/codes.jsonl", json_lines(results.iter().map(|(t, _)| t))?)?;
    w.write("themes/clusters.csv", cluster_report_csv(&clusters, &codes))?;
    w.write("themes/risk_factors.json", pretty(&factors)?)?;
    w.write("themes/exchanges.jsonl", json_lines(results.iter().filter_map(|(_, ex)| ex.as_ref()))?)?;
    let rec = w.finish();
    ctx.record("themes", rec);
    eprintln!("themes: {} codes in {} clusters", codes.len(), clusters.len());
    Ok(())
}

// ---------------------------------------------------------------- rate

pub fn rate(ctx: &mut Context) -> Result<(), CliError> {
    let (patients, corpus_digest) = ctx.corpus()?;
    let rubrics = ctx.rubrics()?;
    let factors = default_factors(&rubrics);
    let backend = ctx.backend(None)?;
    let transcripts: Vec<_> = patients.iter().map(|p| p.transcript.clone()).collect();
    let extracted =
        extract_corpus(&transcripts, &factors, &rubrics, backend.chat(), backend.embedder(), &ctx.cfg.rag, ctx.parallel())?;

    let ratings: Vec<&RatingRecord> = extracted.iter().flat_map(|e| &e.ratings).collect();
    let owned: Vec<RatingRecord> = ratings.iter().map(|r| (*r).clone()).collect();
    let coverage = coverage_stats(&owned)?;

    let mut w = ctx.writer("rate");
    w.input_digest("corpus", corpus_digest);
    if let Some(p) = &ctx.cfg.rubric {
        w.input_file("rubric", p)?;
    }
    w.write("rate/ratings.csv", ratings_csv(&owned))?;
    w.write("rate/ratings.jsonl", json_lines(&ratings)?)?;
    w.write("rate/factor_summaries.jsonl", json_lines(extracted.iter().flat_map(|e| &e.summaries))?)?;
    w.write("rate/coverage.json", pretty(&coverage)?)?;
    w.write("rate/exchanges.jsonl", json_lines(extracted.iter().flat_map(|e| &e.exchanges))?)?;
    if let Backend::Mock(m) = &backend {
        w.write("rate/injections.jsonl", json_lines(m.injections())?)?;
    }
    let rec = w.finish();
    ctx.record("rate", rec);
    eprintln!(
        "rate: {} patients, {:.1}% of subtopic cells missing",
        patients.len(),
        100.0 * coverage.missing_fraction
    );
    Ok(())
}

// ---------------------------------------------------------------- features

pub fn feature_stage(set: FeatureSet) -> String {
    format!("features/{}", set.as_str())
}

pub fn features(ctx: &mut Context) -> Result<(), CliError> {
    let (patients, corpus_digest) = ctx.corpus()?;
    let sets = ctx.cfg.feature_sets()?;
    let grid = if sets.iter().any(|s| *s != FeatureSet::Labs) {
        let rec = ctx.manifest.require(ctx.out(), "rate", "rate")?;
        let digest = rec.outputs.get("rate/ratings.jsonl").cloned().unwrap_or_default();
        let ratings: Vec<RatingRecord> = read_json_lines(&ctx.out().join("rate/ratings.jsonl"))?;
        Some((sdoh_core::rag::ratings_grid(&ratings)?, digest))
    } else {
        None
    };
    for set in sets {
        let (matrix, target) = assemble(grid.as_ref().map(|(g, _)| g), &patients, set)?;
        let prepared = prepare(&matrix, &target, &ctx.cfg.features)?;
        let dir = format!("features/{}", set.as_str());
        let mut w = ctx.writer("features");
        w.input_digest("corpus", corpus_digest.clone());
        if let (Some((_, d)), true) = (&grid, set != FeatureSet::Labs) {
            w.input_digest("rate/ratings.jsonl", d.clone());
        }
        w.write(&format!("{dir}/matrix.csv"), feature_csv(&matrix, &target))?;
        w.write(&format!("{dir}/prepared.json"), pretty(&prepared)?)?;
        let rec = w.finish();
        ctx.record(feature_stage(set), rec);
        eprintln!(
            "features: {} → {} train / {} test rows, {} columns, {} missing cells imputed",
            set.as_str(),
            prepared.train.n_rows(),
            prepared.test.n_rows(),
            matrix.n_cols(),
            prepared.missing_cells
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- train

/// Grid-search outcome for one (feature set, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    pub train_r2: f64,
    /// Mean held-out R² of the selected grid point.
    pub cv_r2: f64,
    /// R² on the reserved test rows; absent when undefined.
    pub test_r2: Option<f64>,
    pub n_folds: usize,
    pub best_index: usize,
    pub best: ModelSpec,
    pub grid: Vec<GridPoint>,
    /// Linear models are grid-searched here too; flagged so reports can say so.
    pub linear_grid_extension: bool,
}

pub fn train_stage(set: FeatureSet, kind: ModelKind) -> String {
    format!("train/{}/{}", set.as_str(), kind.as_str())
}

pub fn train(ctx: &mut Context) -> Result<(), CliError> {
    let sets = ctx.cfg.feature_sets()?;
    let kinds = ctx.cfg.model_kinds()?;
    for set in sets {
        let stage = feature_stage(set);
        let rec = ctx.manifest.require(ctx.out(), &stage, "features")?;
        let rel = format!("{stage}/prepared.json");
        let digest = rec.outputs.get(&rel).cloned().unwrap_or_default();
        let path = ctx.out().join(&rel);
        let prepared: Prepared =
            serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?)?;
        for &kind in &kinds {
            let summary = train_one(ctx, &prepared, set, kind, &digest)?;
            eprintln!(
                "train: {} {:<5} train R² {:>7.3}  CV R² {:>7.3}",
                set.as_str(),
                kind.as_str(),
                summary.train_r2,
                summary.cv_r2
            );
        }
    }
    Ok(())
}

fn train_one(
    ctx: &mut Context,
    prepared: &Prepared,
    set: FeatureSet,
    kind: ModelKind,
    input_digest: &str,
) -> Result<TrainSummary, CliError> {
    let t = &prepared.train;
    let grid = ctx.cfg.grid(kind);
    let res = grid_search_cv(&t.column_names, &t.x, &t.y, &grid, ctx.cfg.train.n_folds, ctx.cfg.seed, ctx.parallel())?;
    let test = &prepared.test;
    let test_r2 = if test.n_rows() >= 2 {
        r2_score(&test.y, &res.model.predict(&test.column_names, &test.x)?).ok()
    } else {
        None
    };
    let summary = TrainSummary {
        feature_set: set,
        model: kind,
        train_r2: res.train_r2,
        cv_r2: res.best.mean_cv_r2,
        test_r2,
        n_folds: ctx.cfg.train.n_folds,
        best_index: res.best_index,
        best: res.best.spec,
        grid: res.grid.clone(),
        linear_grid_extension: !kind.is_tree(),
    };
    let stage = train_stage(set, kind);
    let mut w = ctx.writer("train");
    w.input_digest(format!("{}/prepared.json", feature_stage(set)), input_digest.to_string());
    w.write(&format!("{stage}/model.json"), res.model.to_json())?;
    w.write(&format!("{stage}/cv.json"), pretty(&summary)?)?;
    if kind.is_tree() {
        let imp = feature_importance(&res.model)?;
        let mut csv = csv::Writer::from_writer(Vec::new());
        csv.write_record(["rank", "feature", "importance"]).expect("in-memory write");
        for (rank, feature, value) in imp.ranked() {
            csv.write_record([rank.to_string(), feature, value.to_string()]).expect("in-memory write");
        }
        w.write(&format!("{stage}/importance.csv"), csv.into_inner().expect("in-memory flush"))?;
    }
    let rec = w.finish();
    ctx.record(stage, rec);
    Ok(summary)
}

// ---------------------------------------------------------------- control

pub fn control_stage(label: &str) -> String {
    format!("control/{label}")
}

/// Prediction-audit counters written next to mock control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub prediction_prompts: usize,
    pub prompts_with_residual_a1c: usize,
}

pub fn control(ctx: &mut Context) -> Result<(), CliError> {
    let (patients, corpus_digest) = ctx.corpus()?;
    for label in ctx.cfg.control.models.clone() {
        let backend = ctx.backend(Some(&label))?;
        let run = run_control(&patients, backend.chat(), ctx.parallel())?;
        let stage = control_stage(&label);
        let mut w = ctx.writer("control");
        w.input_digest("corpus", corpus_digest.clone());
        w.write(&format!("{stage}/predictions.jsonl"), prediction_log(&run.predictions))?;
        w.write(&format!("{stage}/exchanges.jsonl"), json_lines(&run.exchanges)?)?;
        w.write(&format!("{stage}/skipped.jsonl"), json_lines(&run.skipped)?)?;
        match evaluate_accuracy(&label, &run.predictions) {
            Ok(table) => {
                w.write(&format!("{stage}/accuracy.csv"), accuracy_csv(std::slice::from_ref(&table)))?;
                eprintln!("control: {label} overall {} ({} non-responses)", table.overall, table.non_response);
            }
            Err(e) => eprintln!("control: {label}: {e}"),
        }
        w.write(&format!("{stage}/confusion.json"), pretty(&confusion_matrix(&run.predictions))?)?;
        if let Backend::Mock(m) = &backend {
            let a = m.prediction_audit();
            w.write(
                &format!("{stage}/audit.json"),
                pretty(&AuditRecord { prediction_prompts: a.prompts, prompts_with_residual_a1c: a.residual })?,
            )?;
        }
        let rec = w.finish();
        ctx.record(stage, rec);
        if !run.skipped.is_empty() {
            eprintln!("control: {label}: {} patient(s) skipped after failed redaction", run.skipped.len());
        }
    }
    Ok(())
}

/// Directories under `<out>/control` holding a prediction log.
pub fn control_labels(out: &Path) -> Vec<String> {
    let dir = out.join("control");
    let Ok(entries) = std::fs::read_dir(&dir) else { return Vec::new() };
    let mut labels: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("predictions.jsonl").is_file())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    labels.sort();
    labels
}
