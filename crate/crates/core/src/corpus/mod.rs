//! Patients, transcripts, lab panels and A1C targets.

mod bank;
mod io;
mod redaction;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bank::{level_phrase, SentenceBank, SUBTOPIC_CODES};
pub use io::{load_corpus, parse_ground_truth_csv, parse_patients_csv, write_corpus, PatientRow};
pub use redaction::{redact_numeric_a1c, verify_redaction, RedactionReport, ResidualSpan};
pub use synth::{generate_synthetic_corpus, GroundTruth, SyntheticConfig, SyntheticCorpus, LAB_COLUMNS};

/// Plausibility window for a recorded A1C percentage.
pub const A1C_WINDOW: (f64, f64) = (3.0, 20.0);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("corpus is empty")]
    Empty,
    #[error("invalid synthetic config: {field}: {message}")]
    Config { field: &'static str, message: String },
    #[error("duplicate patient id {0}")]
    DuplicatePatient(String),
    #[error("malformed corpus: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub patient_id: String,
    pub text: String,
    pub word_count: usize,
}

impl Transcript {
    pub fn new(patient_id: impl Into<String>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::InvalidValue("transcript text is empty".into()));
        }
        let word_count = text.split_whitespace().count();
        Ok(Self { patient_id: patient_id.into(), text, word_count })
    }
}

/// Most recent lab values in mg/dL; `None` is a missing measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabPanel {
    pub triglycerides: Option<f64>,
    pub hdl: Option<f64>,
    pub ldl: Option<f64>,
    pub glucose: Option<f64>,
    pub creatinine: Option<f64>,
}

impl LabPanel {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (name, v) in LAB_COLUMNS.iter().zip(self.values()) {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    return Err(CorpusError::InvalidValue(format!("lab {name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Values in [`LAB_COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.triglycerides, self.hdl, self.ldl, self.glucose, self.creatinine]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub transcript: Transcript,
    pub labs: LabPanel,
    /// Most recent A1C, percent.
    pub a1c: f64,
}

impl PatientRecord {
    pub fn new(transcript: Transcript, labs: LabPanel, a1c: f64) -> Result<Self, CorpusError> {
        if !(A1C_WINDOW.0..=A1C_WINDOW.1).contains(&a1c) {
            return Err(CorpusError::InvalidValue(format!(
                "A1C {a1c} for {} outside plausibility window [3.0, 20.0]",
                transcript.patient_id
            )));
        }
        labs.validate()?;
        Ok(Self { patient_id: transcript.patient_id.clone(), transcript, labs, a1c })
    }

    pub fn control_level(&self) -> ControlLevel {
        categorize_control(self.a1c).expect("validated A1C is finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControlLevel {
    Low,
    Medium,
    High,
}

impl ControlLevel {
    pub const ALL: [ControlLevel; 3] = [ControlLevel::Low, ControlLevel::Medium, ControlLevel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlLevel::Low => "low",
            ControlLevel::Medium => "medium",
            ControlLevel::High => "high",
        }
    }
}

impl std::fmt::Display for ControlLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Low below 6.0, Medium on [6.0, 7.5], High above 7.5.
pub fn categorize_control(a1c: f64) -> Result<ControlLevel, CorpusError> {
    if !a1c.is_finite() {
        return Err(CorpusError::InvalidValue(format!("A1C must be finite, got {a1c}")));
    }
    Ok(if a1c < 6.0 {
        ControlLevel::Low
    } else if a1c <= 7.5 {
        ControlLevel::Medium
    } else {
        ControlLevel::High
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] };
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, median, sd, min: sorted[0], max: sorted[sorted.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub level: ControlLevel,
    pub count: usize,
    /// Percentage of the corpus, one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_patients: usize,
    pub a1c: Summary,
    pub word_count: Summary,
    pub control: Vec<LevelShare>,
}

pub fn corpus_stats(corpus: &[PatientRecord]) -> Result<CorpusStats, CorpusError> {
    let a1c: Vec<f64> = corpus.iter().map(|p| p.a1c).collect();
    let words: Vec<f64> = corpus.iter().map(|p| p.transcript.word_count as f64).collect();
    let a1c_summary = Summary::of(&a1c).ok_or(CorpusError::Empty)?;
    let word_summary = Summary::of(&words).ok_or(CorpusError::Empty)?;
    let mut counts = [0usize; 3];
    for v in &a1c {
        counts[categorize_control(*v)?.index()] += 1;
    }
    let n = corpus.len();
    let control = ControlLevel::ALL
        .iter()
        .map(|&level| LevelShare {
            level,
            count: counts[level.index()],
            percent: crate::round1(100.0 * counts[level.index()] as f64 / n as f64),
        })
        .collect();
    Ok(CorpusStats { n_patients: n, a1c: a1c_summary, word_count: word_summary, control })
}

/// Fails on duplicate patient ids.
pub fn check_unique_ids(corpus: &[PatientRecord]) -> Result<(), CorpusError> {
    let mut seen = std::collections::BTreeSet::new();
    for p in corpus {
        if !seen.insert(p.patient_id.as_str()) {
            return Err(CorpusError::DuplicatePatient(p.patient_id.clone()));
        }
    }
    Ok(())
}
