//! Transcript chunking, embedding retrieval, and the per-factor summary and
//! per-subtopic rating drivers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Transcript;
use crate::llm::{
    chat, embed, parse_factor_bullets, parse_rating_block, verify_quotes, ChatBackend, ChatExchange,
    EmbeddingBackend, EmbeddingVector, FactorBullet, FactorBullets, GatewayError, ParseIssue, PromptRequest,
    QuoteCheck, TemplateName,
};
use crate::rubric::{Rubric, RubricSet, TAXONOMY};

#[derive(Debug, Error)]
pub enum RagError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("ratings grid is incomplete: {0}")]
    IncompleteGrid(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("ratings file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagConfig {
    pub chunk_words: usize,
    pub overlap_words: usize,
    pub top_k: usize,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self { chunk_words: 200, overlap_words: 50, top_k: 6 }
    }
}

impl RagConfig {
    pub fn validate(&self) -> Result<(), RagError> {
        if self.chunk_words == 0 || self.overlap_words >= self.chunk_words {
            return Err(RagError::Config(format!(
                "need chunk_words > overlap_words ≥ 0, got {} and {}",
                self.chunk_words, self.overlap_words
            )));
        }
        if self.top_k == 0 {
            return Err(RagError::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub patient_id: String,
    pub chunk_index: usize,
    /// Original transcript text covering the words in `word_span`.
    pub text: String,
    /// Half-open word range.
    pub word_span: [usize; 2],
}

/// Sliding word windows; the final partial window is kept.
pub fn chunk_transcript(transcript: &Transcript, chunk_words: usize, overlap_words: usize) -> Result<Vec<Chunk>, RagError> {
    RagConfig { chunk_words, overlap_words, top_k: 1 }.validate()?;
    let text = &transcript.text;
    // byte ranges of each whitespace-separated word
    let mut words: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                words.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        words.push((s, text.len()));
    }
    let step = chunk_words - overlap_words;
    let mut chunks = Vec::new();
    let mut first = 0;
    while first < words.len() {
        let end = (first + chunk_words).min(words.len());
        chunks.push(Chunk {
            patient_id: transcript.patient_id.clone(),
            chunk_index: chunks.len(),
            text: text[words[first].0..words[end - 1].1].to_string(),
            word_span: [first, end],
        });
        if end == words.len() {
            break;
        }
        first += step;
    }
    Ok(chunks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub chunks: Vec<Chunk>,
    pub vectors: Vec<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub chunk_index: usize,
    pub score: f64,
}

pub fn build_index(chunks: Vec<Chunk>, backend: &dyn EmbeddingBackend) -> Result<RetrievalIndex, RagError> {
    if chunks.is_empty() {
        return Err(RagError::Empty("no chunks to index"));
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embed(backend, &texts)?;
    Ok(RetrievalIndex { chunks, vectors })
}

impl RetrievalIndex {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Top-k by cosine similarity (dot product of unit vectors), descending;
    /// ties go to the lower chunk index.
    pub fn retrieve_vector(&self, query: &EmbeddingVector, k: usize) -> Vec<Retrieved> {
        let mut scored: Vec<Retrieved> = self
            .vectors
            .iter()
            .zip(&self.chunks)
            .map(|(v, c)| Retrieved { chunk_index: c.chunk_index, score: v.dot(query) })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.chunk_index.cmp(&b.chunk_index)));
        scored.truncate(k);
        scored
    }

    /// Retrieved excerpts joined by blank lines, in rank order.
    pub fn context(&self, hits: &[Retrieved]) -> String {
        hits.iter().map(|h| self.chunks[h.chunk_index].text.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

pub fn retrieve(
    index: &RetrievalIndex,
    backend: &dyn EmbeddingBackend,
    query: &str,
    k: usize,
) -> Result<Vec<Retrieved>, RagError> {
    if k == 0 {
        return Err(RagError::Config("k must be at least 1".into()));
    }
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let q = embed(backend, &[query.to_string()])?.remove(0);
    Ok(index.retrieve_vector(&q, k))
}

/// A topic with the keyword list used by the factor-summary prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub keywords: Vec<String>,
}

impl Factor {
    pub fn query(&self) -> String {
        format!("{} {}", self.name, self.keywords.join(" "))
    }
}

/// The five topics, each with the union of its subtopics' keywords.
pub fn default_factors(rubrics: &RubricSet) -> Vec<Factor> {
    TAXONOMY
        .iter()
        .map(|(topic, _)| Factor {
            name: topic.to_string(),
            keywords: rubrics
                .subtopics
                .iter()
                .filter(|r| r.topic == *topic)
                .flat_map(|r| r.keywords.iter().cloned())
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub patient_id: String,
    pub factor: String,
    /// `None` when the model reported no information.
    pub bullets: Option<Vec<FactorBullet>>,
    pub issues: Vec<ParseIssue>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub patient_id: String,
    pub topic: String,
    pub subtopic: String,
    /// −1 when not present or when extraction failed (see `error`).
    pub rating: i8,
    pub justification: String,
    pub quotes: Vec<QuoteCheck>,
    pub error: Option<String>,
}

impl RatingRecord {
    pub fn label(&self) -> String {
        crate::rubric::subtopic_label(&self.topic, &self.subtopic)
    }

    pub fn is_present(&self) -> bool {
        self.rating != -1 && self.error.is_none()
    }

    fn failed(patient_id: &str, rubric: &Rubric, error: String) -> Self {
        Self {
            patient_id: patient_id.to_string(),
            topic: rubric.topic.clone(),
            subtopic: rubric.subtopic.clone(),
            rating: -1,
            justification: String::new(),
            quotes: Vec::new(),
            error: Some(error),
        }
    }
}

fn retrieve_with(index: &RetrievalIndex, query: &EmbeddingVector, k: usize) -> String {
    index.context(&index.retrieve_vector(query, k))
}

pub fn extract_factor_summary(
    transcript: &Transcript,
    factor: &Factor,
    index: &RetrievalIndex,
    query: &EmbeddingVector,
    backend: &dyn ChatBackend,
    k: usize,
) -> (FactorSummary, Option<ChatExchange>) {
    let mut summary = FactorSummary {
        patient_id: transcript.patient_id.clone(),
        factor: factor.name.clone(),
        bullets: None,
        issues: Vec::new(),
        error: None,
    };
    let request = PromptRequest::with(
        TemplateName::FactorSummary,
        [
            ("topic", factor.name.clone()),
            ("keywords", factor.keywords.join(", ")),
            ("context", retrieve_with(index, query, k)),
        ],
    );
    let exchange = match request.and_then(|r| chat(backend, &r)) {
        Ok(ex) => ex,
        Err(e) => {
            summary.error = Some(e.to_string());
            return (summary, None);
        }
    };
    match parse_factor_bullets(&exchange.response_text) {
        FactorBullets::NoInformation => {}
        FactorBullets::Items { bullets, issues } => {
            summary.bullets = Some(bullets);
            summary.issues = issues;
        }
    }
    (summary, Some(exchange))
}

pub fn rate_subtopic(
    transcript: &Transcript,
    rubric: &Rubric,
    index: &RetrievalIndex,
    query: &EmbeddingVector,
    backend: &dyn ChatBackend,
    k: usize,
) -> (RatingRecord, Option<ChatExchange>) {
    let request = PromptRequest::with(
        TemplateName::SubtopicRating,
        [
            ("subtopic_label", rubric.label()),
            ("scale_text", rubric.scale_text()),
            ("subtopic_text", retrieve_with(index, query, k)),
        ],
    );
    let exchange = match request.and_then(|r| chat(backend, &r)) {
        Ok(ex) => ex,
        Err(e) => return (RatingRecord::failed(&transcript.patient_id, rubric, e.to_string()), None),
    };
    let record = match parse_rating_block(&exchange.response_text) {
        Ok(block) => RatingRecord {
            patient_id: transcript.patient_id.clone(),
            topic: rubric.topic.clone(),
            subtopic: rubric.subtopic.clone(),
            rating: block.rating,
            justification: block.justification.clone(),
            quotes: verify_quotes(&block.quotes(), transcript),
            error: None,
        },
        Err(e) => RatingRecord::failed(&transcript.patient_id, rubric, format!("unparseable rating response: {e}")),
    };
    (record, Some(exchange))
}

/// Everything produced for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientExtraction {
    pub summaries: Vec<FactorSummary>,
    pub ratings: Vec<RatingRecord>,
    pub exchanges: Vec<ChatExchange>,
}

/// Query embeddings shared by every patient.
pub struct Queries {
    pub factors: Vec<(Factor, EmbeddingVector)>,
    pub subtopics: Vec<(Rubric, EmbeddingVector)>,
}

impl Queries {
    pub fn embed(factors: &[Factor], rubrics: &RubricSet, backend: &dyn EmbeddingBackend) -> Result<Self, RagError> {
        let mut texts: Vec<String> = factors.iter().map(Factor::query).collect();
        texts.extend(rubrics.subtopics.iter().map(Rubric::query));
        let mut vectors = embed(backend, &texts)?.into_iter();
        Ok(Self {
            factors: factors.iter().cloned().zip(vectors.by_ref()).collect(),
            subtopics: rubrics.subtopics.iter().cloned().zip(vectors).collect(),
        })
    }
}

/// Runs factor summaries and subtopic ratings for one patient. Embedding
/// failures degrade to failed records rather than aborting.
pub fn extract_patient(
    transcript: &Transcript,
    queries: &Queries,
    chat_backend: &dyn ChatBackend,
    embedder: &dyn EmbeddingBackend,
    config: &RagConfig,
) -> Result<PatientExtraction, RagError> {
    config.validate()?;
    let chunks = chunk_transcript(transcript, config.chunk_words, config.overlap_words)?;
    let index = match build_index(chunks, embedder) {
        Ok(i) => i,
        Err(e) => {
            let note = format!("could not index transcript: {e}");
            return Ok(PatientExtraction {
                summaries: queries
                    .factors
                    .iter()
                    .map(|(f, _)| FactorSummary {
                        patient_id: transcript.patient_id.clone(),
                        factor: f.name.clone(),
                        bullets: None,
                        issues: Vec::new(),
                        error: Some(note.clone()),
                    })
                    .collect(),
                ratings: queries
                    .subtopics
                    .iter()
                    .map(|(r, _)| RatingRecord::failed(&transcript.patient_id, r, note.clone()))
                    .collect(),
                exchanges: Vec::new(),
            });
        }
    };
    let mut out = PatientExtraction { summaries: Vec::new(), ratings: Vec::new(), exchanges: Vec::new() };
    for (factor, q) in &queries.factors {
        let (s, ex) = extract_factor_summary(transcript, factor, &index, q, chat_backend, config.top_k);
        out.summaries.push(s);
        out.exchanges.extend(ex);
    }
    for (rubric, q) in &queries.subtopics {
        let (r, ex) = rate_subtopic(transcript, rubric, &index, q, chat_backend, config.top_k);
        out.ratings.push(r);
        out.exchanges.extend(ex);
    }
    Ok(out)
}

/// Extracts every patient, in parallel when asked; output order follows input.
pub fn extract_corpus(
    transcripts: &[Transcript],
    factors: &[Factor],
    rubrics: &RubricSet,
    chat_backend: &dyn ChatBackend,
    embedder: &dyn EmbeddingBackend,
    config: &RagConfig,
    parallel: bool,
) -> Result<Vec<PatientExtraction>, RagError> {
    config.validate()?;
    if transcripts.is_empty() {
        return Err(RagError::Empty("no transcripts"));
    }
    let queries = Queries::embed(factors, rubrics, embedder)?;
    let run = |t: &Transcript| extract_patient(t, &queries, chat_backend, embedder, config);
    if parallel {
        transcripts.par_iter().map(run).collect()
    } else {
        transcripts.iter().map(run).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtopicCoverage {
    pub topic: String,
    pub subtopic: String,
    pub present: usize,
    pub total: usize,
    /// Share of patients with a rating, to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub subtopics: Vec<SubtopicCoverage>,
    pub missing_cells: usize,
    pub total_cells: usize,
    /// Unrounded missing fraction of the whole grid.
    pub missing_fraction: f64,
}

/// Presence per subtopic over a full patients × 15 grid; failed ratings
/// count as missing.
pub fn coverage_stats(ratings: &[RatingRecord]) -> Result<CoverageStats, RagError> {
    if ratings.is_empty() {
        return Err(RagError::Empty("no ratings"));
    }
    let grid = ratings_grid(ratings)?;
    let n = grid.len();
    let labels = crate::rubric::canonical_labels();
    let mut subtopics = Vec::with_capacity(labels.len());
    let mut missing_cells = 0;
    for (s, (topic, sub)) in TAXONOMY.iter().flat_map(|(t, subs)| subs.iter().map(move |s| (*t, *s))).enumerate() {
        let present = grid.values().filter(|row| row[s].is_some()).count();
        missing_cells += n - present;
        subtopics.push(SubtopicCoverage {
            topic: topic.to_string(),
            subtopic: sub.to_string(),
            present,
            total: n,
            percent: crate::round1(100.0 * present as f64 / n as f64),
        });
    }
    let total_cells = n * labels.len();
    Ok(CoverageStats { subtopics, missing_cells, total_cells, missing_fraction: missing_cells as f64 / total_cells as f64 })
}

/// Patient → ratings in taxonomy order (`None` = missing). Requires exactly
/// one record per (patient, subtopic).
pub fn ratings_grid(ratings: &[RatingRecord]) -> Result<BTreeMap<String, [Option<u8>; 15]>, RagError> {
    let labels = crate::rubric::canonical_labels();
    let mut grid: BTreeMap<String, [Option<u8>; 15]> = BTreeMap::new();
    let mut seen: BTreeMap<String, [bool; 15]> = BTreeMap::new();
    for r in ratings {
        let label = r.label();
        let s = labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| RagError::IncompleteGrid(format!("unknown subtopic {label:?}")))?;
        let flags = seen.entry(r.patient_id.clone()).or_insert([false; 15]);
        if std::mem::replace(&mut flags[s], true) {
            return Err(RagError::IncompleteGrid(format!("{} rated twice for {label}", r.patient_id)));
        }
        let value = r.is_present().then(|| u8::try_from(r.rating).ok()).flatten();
        grid.entry(r.patient_id.clone()).or_insert([None; 15])[s] = value;
    }
    for (pid, flags) in &seen {
        if let Some(s) = flags.iter().position(|f| !f) {
            return Err(RagError::IncompleteGrid(format!("{pid} has no rating for {}", labels[s])));
        }
    }
    Ok(grid)
}

pub const RATINGS_HEADER: [&str; 6] = ["patient_id", "topic", "subtopic", "rating", "quote_verified_count", "quote_total"];

pub fn ratings_csv(ratings: &[RatingRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(RATINGS_HEADER);
    for r in ratings {
        let verified = r.quotes.iter().filter(|q| q.verified).count();
        let _ = w.write_record([
            r.patient_id.clone(),
            r.topic.clone(),
            r.subtopic.clone(),
            r.rating.to_string(),
            verified.to_string(),
            r.quotes.len().to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// One row of the ratings CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRow {
    pub patient_id: String,
    pub topic: String,
    pub subtopic: String,
    pub rating: i8,
    pub quote_verified_count: usize,
    pub quote_total: usize,
}

pub fn parse_ratings_csv(bytes: &[u8]) -> Result<Vec<RatingRow>, RagError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
    let header = reader.headers().map_err(|e| RagError::Malformed { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != RATINGS_HEADER {
        return Err(RagError::Malformed { line: 1, message: format!("expected header {}", RATINGS_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<RatingRow>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| RagError::Malformed { line, message: e.to_string() })?;
        if !matches!(row.rating, -1 | 1..=5) {
            return Err(RagError::Malformed { line, message: format!("rating {} out of range", row.rating) });
        }
        if row.quote_verified_count > row.quote_total {
            return Err(RagError::Malformed { line, message: "more verified quotes than quotes".into() });
        }
        rows.push(row);
    }
    Ok(rows)
}

impl From<&RatingRow> for RatingRecord {
    fn from(row: &RatingRow) -> Self {
        Self {
            patient_id: row.patient_id.clone(),
            topic: row.topic.clone(),
            subtopic: row.subtopic.clone(),
            rating: row.rating,
            justification: String::new(),
            quotes: Vec::new(),
            error: None,
        }
    }
}
