//! On-disk corpus layout:
//!
//! ```text
//! <dir>/patients.csv          patient_id,a1c,triglycerides,hdl,ldl,glucose,creatinine
//! <dir>/transcripts/<id>.txt  UTF-8 interview text
//! <dir>/ground_truth.csv      synthetic corpora only: patient_id + one column per subtopic
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_unique_ids, CorpusError, GroundTruth, LabPanel, PatientRecord, Transcript};
use crate::rubric::canonical_labels;

pub const PATIENTS_HEADER: [&str; 7] = ["patient_id", "a1c", "triglycerides", "hdl", "ldl", "glucose", "creatinine"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub patient_id: String,
    pub a1c: f64,
    pub triglycerides: Option<f64>,
    pub hdl: Option<f64>,
    pub ldl: Option<f64>,
    pub glucose: Option<f64>,
    pub creatinine: Option<f64>,
}

impl PatientRow {
    fn labs(&self) -> LabPanel {
        LabPanel {
            triglycerides: self.triglycerides,
            hdl: self.hdl,
            ldl: self.ldl,
            glucose: self.glucose,
            creatinine: self.creatinine,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.display().to_string(), source }
}

/// Ids become file names, so only a conservative character set is allowed.
fn check_id(id: &str) -> Result<(), CorpusError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CorpusError::Malformed(format!("invalid patient id {id:?}")))
    }
}

/// Parses `patients.csv`. Empty lab cells are missing values.
pub fn parse_patients_csv(bytes: &[u8]) -> Result<Vec<PatientRow>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != PATIENTS_HEADER {
        return Err(CorpusError::Malformed(format!(
            "patients.csv header must be {}, got {}",
            PATIENTS_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<PatientRow>() {
        let row = record?;
        check_id(&row.patient_id)?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_ground_truth_csv(bytes: &[u8]) -> Result<GroundTruth, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let labels = canonical_labels();
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("patient_id") || header[1..] != labels[..] {
        return Err(CorpusError::Malformed("ground_truth.csv header does not match the taxonomy".into()));
    }
    let mut levels = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let mut row = [0i8; 15];
        for (i, cell) in record.iter().skip(1).enumerate() {
            let v: i8 = cell.parse().map_err(|_| CorpusError::Malformed(format!("bad level {cell:?}")))?;
            if !(v == -1 || (1..=5).contains(&v)) {
                return Err(CorpusError::Malformed(format!("level {v} out of range")));
            }
            row[i] = v;
        }
        levels.insert(record[0].to_string(), row);
    }
    Ok(GroundTruth { levels })
}

pub fn load_corpus(dir: &Path) -> Result<Vec<PatientRecord>, CorpusError> {
    let csv_path = dir.join("patients.csv");
    let bytes = fs::read(&csv_path).map_err(io_err(&csv_path))?;
    let rows = parse_patients_csv(&bytes)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let path = dir.join("transcripts").join(format!("{}.txt", row.patient_id));
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let transcript = Transcript::new(&row.patient_id, text)?;
        records.push(PatientRecord::new(transcript, row.labs(), row.a1c)?);
    }
    check_unique_ids(&records)?;
    Ok(records)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_corpus(dir: &Path, patients: &[PatientRecord], truth: Option<&GroundTruth>) -> Result<(), CorpusError> {
    check_unique_ids(patients)?;
    let tdir = dir.join("transcripts");
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATIENTS_HEADER)?;
    for p in patients {
        check_id(&p.patient_id)?;
        let l = &p.labs;
        w.write_record([
            p.patient_id.clone(),
            p.a1c.to_string(),
            fmt_opt(l.triglycerides),
            fmt_opt(l.hdl),
            fmt_opt(l.ldl),
            fmt_opt(l.glucose),
            fmt_opt(l.creatinine),
        ])?;
        let path = tdir.join(format!("{}.txt", p.patient_id));
        fs::write(&path, &p.transcript.text).map_err(io_err(&path))?;
    }
    let csv_path = dir.join("patients.csv");
    fs::write(&csv_path, w.into_inner().expect("in-memory writer")).map_err(io_err(&csv_path))?;

    if let Some(truth) = truth {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["patient_id".to_string()];
        header.extend(canonical_labels());
        w.write_record(&header)?;
        for (id, row) in &truth.levels {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let path = dir.join("ground_truth.csv");
        fs::write(&path, w.into_inner().expect("in-memory writer")).map_err(io_err(&path))?;
    }
    Ok(())
}
