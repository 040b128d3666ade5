//! Structured social-determinants-of-health (SDOH) extraction from patient
//! interview transcripts, A1C regression on the extracted ratings plus lab
//! biomarkers, and evaluation of LLM-predicted diabetes-control levels.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: patients, transcripts, labs, control levels, redaction
//!   checks and the synthetic corpus generator.
//! - [`llm`]: prompt templates, chat/embedding backends (live HTTP and a
//!   deterministic mock), response parsers and quote verification.
//! - [`thematic`]: cosine geometry and agglomerative clustering of theme codes.
//! - [`rag`]: transcript chunking, retrieval and the per-factor / per-subtopic
//!   extraction drivers.
//! - [`features`]: feature-set assembly, KNN imputation, min-max scaling and
//!   the train/test split.
//! - [`models`]: ridge, lasso, random forest and gradient-boosted trees,
//!   with R², grid-search CV and impurity importance.
//! - [`control`]: redaction → prediction → categorisation → accuracy tables.

pub mod control;
pub mod corpus;
pub mod features;
pub mod llm;
pub mod models;
pub mod rag;
pub mod rubric;
pub mod seed;
pub mod thematic;

pub use corpus::{categorize_control, ControlLevel, PatientRecord};
pub use rubric::{Rubric, RubricSet};

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Round to one decimal place, half away from zero.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}
