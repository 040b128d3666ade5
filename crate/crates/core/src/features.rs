//! Feature-set assembly, KNN imputation, min-max scaling and the
//! train/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PatientRecord, LAB_COLUMNS};
use crate::rubric::canonical_labels;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("patient ids do not align: missing ratings for {missing_ratings:?}, ratings without a patient {unknown:?}")]
    Alignment { missing_ratings: Vec<String>, unknown: Vec<String> },
    #[error("column {0:?} has no observed values")]
    AllMissingColumn(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("matrix is not rectangular: row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("feature file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Sdoh,
    Labs,
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Sdoh, FeatureSet::Labs, FeatureSet::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Sdoh => "sdoh",
            FeatureSet::Labs => "labs",
            FeatureSet::Combined => "combined",
        }
    }

    pub fn column_names(self) -> Vec<String> {
        let labs = LAB_COLUMNS.iter().map(|s| s.to_string());
        match self {
            FeatureSet::Sdoh => canonical_labels(),
            FeatureSet::Labs => labs.collect(),
            FeatureSet::Combined => canonical_labels().into_iter().chain(labs).collect(),
        }
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| FeatureError::Config(format!("unknown feature set {s:?}")))
    }
}

/// Rows of optional values; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub patient_ids: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    pub fn new(column_names: Vec<String>, patient_ids: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self, FeatureError> {
        let mut seen = column_names.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != column_names.len() {
            return Err(FeatureError::Config("column names must be unique".into()));
        }
        if patient_ids.len() != rows.len() {
            return Err(FeatureError::Config(format!("{} ids for {} rows", patient_ids.len(), rows.len())));
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != column_names.len() {
                return Err(FeatureError::Ragged { row, expected: column_names.len(), found: r.len() });
            }
        }
        Ok(Self { column_names, patient_ids, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn missing_cells(&self) -> usize {
        self.rows.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            column_names: self.column_names.clone(),
            patient_ids: idx.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Builds the matrix and A1C target in patient order. Ratings of −1 (stored
/// as `None` in the grid) become missing cells.
pub fn assemble(
    grid: Option<&BTreeMap<String, [Option<u8>; 15]>>,
    patients: &[PatientRecord],
    kind: FeatureSet,
) -> Result<(FeatureMatrix, Vec<f64>), FeatureError> {
    let needs_ratings = kind != FeatureSet::Labs;
    if let Some(grid) = grid {
        let ids: Vec<&str> = patients.iter().map(|p| p.transcript.patient_id.as_str()).collect();
        let missing_ratings: Vec<String> =
            ids.iter().filter(|id| !grid.contains_key(**id)).map(|s| s.to_string()).collect();
        let unknown: Vec<String> = grid.keys().filter(|k| !ids.contains(&k.as_str())).cloned().collect();
        if !missing_ratings.is_empty() || !unknown.is_empty() {
            return Err(FeatureError::Alignment { missing_ratings, unknown });
        }
    } else if needs_ratings {
        return Err(FeatureError::Config(format!("feature set {} needs a ratings grid", kind.as_str())));
    }
    let mut rows = Vec::with_capacity(patients.len());
    for p in patients {
        let mut row = Vec::new();
        if needs_ratings {
            let ratings = grid.and_then(|g| g.get(&p.transcript.patient_id)).copied().unwrap_or([None; 15]);
            row.extend(ratings.iter().map(|r| r.map(f64::from)));
        }
        if kind != FeatureSet::Sdoh {
            row.extend(p.labs.values());
        }
        rows.push(row);
    }
    let ids = patients.iter().map(|p| p.transcript.patient_id.clone()).collect();
    let target = patients.iter().map(|p| p.a1c).collect();
    Ok((FeatureMatrix::new(kind.column_names(), ids, rows)?, target))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputerConfig {
    pub k: usize,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Squared distance over co-observed coordinates, scaled by
/// (total columns / co-observed count). `None` when nothing is co-observed.
pub fn missing_aware_distance(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut m = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            sum += (x - y) * (x - y);
            m += 1;
        }
    }
    (m > 0).then(|| sum * a.len() as f64 / m as f64)
}

/// Fills each missing cell of `targets` with the mean of that column over the
/// k nearest `donors` observing it (ties by donor index). When `same_rows`,
/// targets and donors are the same rows and a row never donates to itself.
/// With no usable donor the column mean of the donors is used.
fn impute_from(
    targets: &[Vec<Option<f64>>],
    donors: &[Vec<Option<f64>>],
    same_rows: bool,
    k: usize,
    names: &[String],
) -> Result<Vec<Vec<f64>>, FeatureError> {
    let p = names.len();
    let mut col_means = Vec::with_capacity(p);
    for (c, name) in names.iter().enumerate() {
        let obs: Vec<f64> = donors.iter().filter_map(|r| r[c]).collect();
        if obs.is_empty() {
            return Err(FeatureError::AllMissingColumn(name.clone()));
        }
        col_means.push(obs.iter().sum::<f64>() / obs.len() as f64);
    }
    let mut out = Vec::with_capacity(targets.len());
    for (i, row) in targets.iter().enumerate() {
        if row.iter().all(Option::is_some) {
            out.push(row.iter().map(|v| v.unwrap()).collect());
            continue;
        }
        // donors ranked once per row, then filtered per column
        let mut ranked: Vec<(f64, usize)> = donors
            .iter()
            .enumerate()
            .filter(|(j, _)| !(same_rows && *j == i))
            .filter_map(|(j, d)| missing_aware_distance(row, d).map(|dist| (dist, j)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let filled = row
            .iter()
            .enumerate()
            .map(|(c, v)| match v {
                Some(v) => *v,
                None => {
                    let vals: Vec<f64> = ranked.iter().filter_map(|&(_, j)| donors[j][c]).take(k).collect();
                    if vals.is_empty() {
                        col_means[c]
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                }
            })
            .collect();
        out.push(filled);
    }
    Ok(out)
}

fn check_k(k: usize, n: usize) -> Result<(), FeatureError> {
    if k == 0 || k >= n {
        return Err(FeatureError::Config(format!("imputer k must satisfy 1 ≤ k < rows ({n}), got {k}")));
    }
    Ok(())
}

pub fn knn_impute(matrix: &FeatureMatrix, config: &ImputerConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    check_k(config.k, matrix.n_rows())?;
    impute_from(&matrix.rows, &matrix.rows, true, config.k, &matrix.column_names)
}

/// Imputes `targets` using only `donors` (no-leakage mode for test rows).
pub fn knn_impute_with(
    targets: &FeatureMatrix,
    donors: &FeatureMatrix,
    config: &ImputerConfig,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    if config.k == 0 || config.k > donors.n_rows() {
        return Err(FeatureError::Config(format!("imputer k must lie in 1..={}", donors.n_rows())));
    }
    impute_from(&targets.rows, &donors.rows, false, config.k, &donors.column_names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(rows: &[Vec<f64>]) -> Result<ScalerParams, FeatureError> {
    let first = rows.first().ok_or(FeatureError::TooFewRows { needed: 1, got: 0 })?;
    let mut min = first.clone();
    let mut max = first.clone();
    for r in rows {
        for (c, v) in r.iter().enumerate() {
            min[c] = min[c].min(*v);
            max[c] = max[c].max(*v);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    /// (x − min)/(max − min) clamped to [0, 1]; constant columns map to 0.
    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(c, v)| {
                        let span = self.max[c] - self.min[c];
                        if span > 0.0 {
                            ((v - self.min[c]) / span).clamp(0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Inverse of `apply` for non-constant columns; constant columns return min.
    pub fn inverse(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().enumerate().map(|(c, v)| self.min[c] + v * (self.max[c] - self.min[c])).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_fraction: 0.2, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MIN_SPLIT_ROWS: usize = 5;

/// Seeded permutation; the first ⌈(1 − test_fraction)·n⌉ rows train.
pub fn train_test_split(n: usize, spec: &SplitSpec) -> Result<Split, FeatureError> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(FeatureError::Config(format!("test_fraction must lie in (0, 1), got {}", spec.test_fraction)));
    }
    if n < MIN_SPLIT_ROWS {
        return Err(FeatureError::TooFewRows { needed: MIN_SPLIT_ROWS, got: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut crate::seed::stream_rng(spec.seed, crate::seed::SPLIT));
    let n_train = (((1.0 - spec.test_fraction) * n as f64) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let test = perm.split_off(n_train);
    Ok(Split { train: perm, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub column_names: Vec<String>,
    pub patient_ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub imputer: ImputerConfig,
    pub split: SplitSpec,
    /// Fit the scaler on all rows instead of the training rows.
    pub scale_fit_on_all: bool,
    /// Impute training rows from training donors only, and test rows from
    /// training donors.
    pub strict_no_leakage: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self { imputer: ImputerConfig::default(), split: SplitSpec::default(), scale_fit_on_all: false, strict_no_leakage: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub split: Split,
    pub scaler: ScalerParams,
    pub config: PrepConfig,
    pub missing_cells: usize,
}

/// assemble → impute → split → fit scaler (train only unless configured) →
/// scale both parts.
pub fn prepare(matrix: &FeatureMatrix, target: &[f64], config: &PrepConfig) -> Result<Prepared, FeatureError> {
    if target.len() != matrix.n_rows() {
        return Err(FeatureError::Config(format!("{} targets for {} rows", target.len(), matrix.n_rows())));
    }
    let split = train_test_split(matrix.n_rows(), &config.split)?;
    let (train_x, test_x, all_x) = if config.strict_no_leakage {
        let train_m = matrix.select_rows(&split.train);
        let test_m = matrix.select_rows(&split.test);
        let train_x = knn_impute(&train_m, &config.imputer)?;
        let test_x = knn_impute_with(&test_m, &train_m, &config.imputer)?;
        let mut all = train_x.clone();
        all.extend(test_x.iter().cloned());
        (train_x, test_x, all)
    } else {
        let all = knn_impute(matrix, &config.imputer)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
        (pick(&split.train), pick(&split.test), all)
    };
    let scaler = if config.scale_fit_on_all { fit_minmax(&all_x)? } else { fit_minmax(&train_x)? };
    let part = |idx: &[usize], x: &[Vec<f64>]| Dataset {
        column_names: matrix.column_names.clone(),
        patient_ids: idx.iter().map(|&i| matrix.patient_ids[i].clone()).collect(),
        x: scaler.apply(x),
        y: idx.iter().map(|&i| target[i]).collect(),
    };
    Ok(Prepared {
        train: part(&split.train, &train_x),
        test: part(&split.test, &test_x),
        split,
        scaler: scaler.clone(),
        config: *config,
        missing_cells: matrix.missing_cells(),
    })
}

pub const TARGET_COLUMN: &str = "A1C";

/// `patient_id,<columns>,A1C`; missing cells are empty.
pub fn feature_csv(matrix: &FeatureMatrix, target: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["patient_id".to_string()];
    header.extend(matrix.column_names.iter().cloned());
    header.push(TARGET_COLUMN.into());
    let _ = w.write_record(&header);
    for ((id, row), y) in matrix.patient_ids.iter().zip(&matrix.rows).zip(target) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        rec.push(y.to_string());
        let _ = w.write_record(&rec);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn parse_feature_csv(bytes: &[u8]) -> Result<(FeatureMatrix, Vec<f64>), FeatureError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(bytes);
    let header = reader.headers().map_err(|e| FeatureError::Malformed { line: 1, message: e.to_string() })?.clone();
    let cols: Vec<String> = header.iter().map(String::from).collect();
    if cols.len() < 3 || cols[0] != "patient_id" || cols[cols.len() - 1] != TARGET_COLUMN {
        return Err(FeatureError::Malformed { line: 1, message: format!("header must be patient_id,...,{TARGET_COLUMN}") });
    }
    let names = cols[1..cols.len() - 1].to_vec();
    let number = |s: &str, line: usize| -> Result<f64, FeatureError> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| FeatureError::Malformed { line, message: format!("not a number: {s:?}") })
    };
    let (mut ids, mut rows, mut target) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| FeatureError::Malformed { line, message: e.to_string() })?;
        ids.push(rec[0].to_string());
        let mut row = Vec::with_capacity(names.len());
        for cell in rec.iter().skip(1).take(names.len()) {
            row.push(if cell.trim().is_empty() { None } else { Some(number(cell, line)?) });
        }
        rows.push(row);
        target.push(number(&rec[rec.len() - 1], line)?);
    }
    Ok((FeatureMatrix::new(names, ids, rows)?, target))
}
