//! Redaction → A1C prediction → control level → accuracy tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{categorize_control, verify_redaction, ControlLevel, PatientRecord, ResidualSpan};
use crate::llm::{
    chat, parse_a1c_prediction, verify_quotes_in, ChatBackend, ChatExchange, GatewayError, PredictedA1C,
    PromptRequest, QuoteCheck, TemplateName,
};

#[derive(Debug, Error)]
pub enum ControlError {
    /// The redactor left numeric A1C mentions; the transcript is never sent on.
    #[error("redaction left {} numeric A1C mention(s) in {patient_id}", residual.len())]
    Redaction { patient_id: String, residual: Vec<ResidualSpan> },
    #[error("model {0} produced no parseable predictions; accuracy is undefined")]
    NoResponses(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("prediction log line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid accuracy table: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPrediction {
    pub patient_id: String,
    pub predicted: PredictedA1C,
    /// Present exactly when `predicted.value` is.
    pub predicted_level: Option<ControlLevel>,
    pub true_a1c: f64,
    pub true_level: ControlLevel,
    /// Supporting quotes checked against the redacted transcript.
    pub quote_checks: Vec<QuoteCheck>,
    /// Backend failure that turned this patient into a non-response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ControlPrediction {
    /// Builds a prediction, deriving both levels with [`categorize_control`].
    pub fn new(patient_id: impl Into<String>, predicted: PredictedA1C, true_a1c: f64) -> Result<Self, ControlError> {
        let patient_id = patient_id.into();
        let level = |v: f64| {
            categorize_control(v).map_err(|e| ControlError::Malformed { line: 0, message: format!("{patient_id}: {e}") })
        };
        let predicted_level = predicted.value.map(level).transpose()?;
        let true_level = level(true_a1c)?;
        Ok(Self { patient_id, predicted, predicted_level, true_a1c, true_level, quote_checks: Vec::new(), error: None })
    }

    pub fn is_response(&self) -> bool {
        self.predicted_level.is_some()
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_level == Some(self.true_level)
    }

    fn check(&self) -> Result<(), String> {
        let expect = self.predicted.value.map(categorize_control).transpose().map_err(|e| e.to_string())?;
        if expect != self.predicted_level {
            return Err(format!("{}: predicted_level disagrees with predicted value", self.patient_id));
        }
        if categorize_control(self.true_a1c).map_err(|e| e.to_string())? != self.true_level {
            return Err(format!("{}: true_level disagrees with true_a1c", self.patient_id));
        }
        Ok(())
    }
}

/// Everything one patient's control run sent and received.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientControl {
    pub prediction: ControlPrediction,
    pub redacted_text: String,
    pub exchanges: Vec<ChatExchange>,
}

/// Redacts the transcript, refuses to continue if any numeric A1C mention
/// survives, then asks for a prediction on the redacted text.
///
/// Backend failures become non-responses; residual A1C is a hard error.
pub fn redact_and_predict(patient: &PatientRecord, backend: &dyn ChatBackend) -> Result<PatientControl, ControlError> {
    let non_response = |e: GatewayError, exchanges: Vec<ChatExchange>, redacted: String| {
        let mut prediction = ControlPrediction::new(&patient.patient_id, PredictedA1C::non_response(), patient.a1c)?;
        prediction.error = Some(e.to_string());
        Ok(PatientControl { prediction, redacted_text: redacted, exchanges })
    };

    let request =
        PromptRequest::with(TemplateName::A1cRedaction, [("interview_text", patient.transcript.text.clone())])?;
    let redaction = match chat(backend, &request) {
        Ok(x) => x,
        Err(e) => return non_response(e, Vec::new(), String::new()),
    };
    let redacted = redaction.response_text.clone();
    let report = verify_redaction(&redacted);
    if !report.clean {
        return Err(ControlError::Redaction { patient_id: patient.patient_id.clone(), residual: report.residual });
    }

    let request = PromptRequest::with(TemplateName::A1cPrediction, [("interview_text", redacted.clone())])?;
    let answer = match chat(backend, &request) {
        Ok(x) => x,
        Err(e) => return non_response(e, vec![redaction], redacted),
    };
    let parsed = parse_a1c_prediction(&answer.response_text);
    let quote_checks = verify_quotes_in(&parsed.quotes, &redacted);
    let mut prediction = ControlPrediction::new(&patient.patient_id, parsed, patient.a1c)?;
    prediction.quote_checks = quote_checks;
    Ok(PatientControl { prediction, redacted_text: redacted, exchanges: vec![redaction, answer] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedactionFailure {
    pub patient_id: String,
    pub residual: Vec<ResidualSpan>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlRun {
    /// In corpus order, redaction failures omitted.
    pub predictions: Vec<ControlPrediction>,
    pub skipped: Vec<RedactionFailure>,
    pub exchanges: Vec<ChatExchange>,
}

/// Runs every patient; redaction failures are skipped and reported, other
/// errors abort.
pub fn run_control(corpus: &[PatientRecord], backend: &dyn ChatBackend, parallel: bool) -> Result<ControlRun, ControlError> {
    let results: Vec<Result<PatientControl, ControlError>> = if parallel {
        corpus.par_iter().map(|p| redact_and_predict(p, backend)).collect()
    } else {
        corpus.iter().map(|p| redact_and_predict(p, backend)).collect()
    };
    let mut run = ControlRun::default();
    for r in results {
        match r {
            Ok(pc) => {
                run.exchanges.extend(pc.exchanges);
                run.predictions.push(pc.prediction);
            }
            Err(ControlError::Redaction { patient_id, residual }) => {
                run.skipped.push(RedactionFailure { patient_id, residual })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub total: usize,
}

impl Cell {
    /// Percentage to one decimal; `None` for an empty class.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| crate::round1(100.0 * self.correct as f64 / self.total as f64))
    }
}

impl std::fmt::Display for Cell {
    /// `79.1% (34/43)`; `n/a (0/0)` for an empty class.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.percent() {
            Some(p) => write!(f, "{p:.1}% ({}/{})", self.correct, self.total),
            None => write!(f, "n/a (0/0)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub model: String,
    /// Indexed by [`ControlLevel::index`]; denominators count responded
    /// patients whose true level is that class.
    pub per_class: [Cell; 3],
    pub overall: Cell,
    pub non_response: usize,
}

impl AccuracyTable {
    pub fn class(&self, level: ControlLevel) -> Cell {
        self.per_class[level.index()]
    }

    pub fn corpus_size(&self) -> usize {
        self.overall.total + self.non_response
    }
}

/// Per-class and overall accuracy with non-responses excluded from every
/// denominator.
pub fn evaluate_accuracy(model: &str, predictions: &[ControlPrediction]) -> Result<AccuracyTable, ControlError> {
    let mut per_class = [Cell::default(); 3];
    let mut non_response = 0;
    for p in predictions {
        if !p.is_response() {
            non_response += 1;
            continue;
        }
        let cell = &mut per_class[p.true_level.index()];
        cell.total += 1;
        cell.correct += usize::from(p.is_correct());
    }
    let overall = Cell {
        correct: per_class.iter().map(|c| c.correct).sum(),
        total: per_class.iter().map(|c| c.total).sum(),
    };
    if overall.total == 0 {
        return Err(ControlError::NoResponses(model.to_string()));
    }
    Ok(AccuracyTable { model: model.to_string(), per_class, overall, non_response })
}

/// Rows are true level, columns predicted level; non-responses are counted
/// per true level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
    pub non_response: [usize; 3],
}

impl ConfusionMatrix {
    pub fn row(&self, truth: ControlLevel) -> [usize; 3] {
        self.counts[truth.index()]
    }

    pub fn row_total(&self, truth: ControlLevel) -> usize {
        self.counts[truth.index()].iter().sum()
    }
}

pub fn confusion_matrix(predictions: &[ControlPrediction]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for p in predictions {
        match p.predicted_level {
            Some(pred) => m.counts[p.true_level.index()][pred.index()] += 1,
            None => m.non_response[p.true_level.index()] += 1,
        }
    }
    m
}

pub const ACCURACY_HEADER: [&str; 10] = [
    "model",
    "low_correct",
    "low_total",
    "medium_correct",
    "medium_total",
    "high_correct",
    "high_total",
    "overall_correct",
    "overall_total",
    "non_response",
];

pub fn accuracy_csv(tables: &[AccuracyTable]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ACCURACY_HEADER).expect("in-memory write");
    for t in tables {
        let mut row = vec![t.model.clone()];
        for c in t.per_class.iter().chain([&t.overall]) {
            row.push(c.correct.to_string());
            row.push(c.total.to_string());
        }
        row.push(t.non_response.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_accuracy_csv(text: &str) -> Result<Vec<AccuracyTable>, ControlError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ControlError::Malformed { line: 1, message: e.to_string() })?;
    if header.iter().ne(ACCURACY_HEADER) {
        return Err(ControlError::Malformed { line: 1, message: format!("expected header {}", ACCURACY_HEADER.join(",")) });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ControlError::Malformed { line, message: e.to_string() })?;
        let n: Vec<usize> = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| ControlError::Malformed { line, message: e.to_string() })?;
        let cell = |k: usize| Cell { correct: n[2 * k], total: n[2 * k + 1] };
        let t = AccuracyTable {
            model: rec[0].to_string(),
            per_class: [cell(0), cell(1), cell(2)],
            overall: cell(3),
            non_response: n[8],
        };
        let sum = |f: fn(&Cell) -> usize| t.per_class.iter().map(f).sum::<usize>();
        if sum(|c| c.correct) != t.overall.correct || sum(|c| c.total) != t.overall.total {
            return Err(ControlError::Inconsistent(format!("line {line}: class cells do not sum to overall")));
        }
        if t.per_class.iter().any(|c| c.correct > c.total) {
            return Err(ControlError::Inconsistent(format!("line {line}: correct exceeds total")));
        }
        out.push(t);
    }
    Ok(out)
}

/// One JSON object per prediction.
pub fn prediction_log(predictions: &[ControlPrediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("prediction serialises"));
        out.push('\n');
    }
    out
}

/// Reads a prediction log, rejecting records whose levels disagree with
/// their A1C values.
pub fn parse_prediction_log(text: &str) -> Result<Vec<ControlPrediction>, ControlError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let p: ControlPrediction =
            serde_json::from_str(raw).map_err(|e| ControlError::Malformed { line: i + 1, message: e.to_string() })?;
        p.check().map_err(|message| ControlError::Malformed { line: i + 1, message })?;
        out.push(p);
    }
    Ok(out)
}
