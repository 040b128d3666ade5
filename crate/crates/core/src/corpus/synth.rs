//! Seeded synthetic interview corpus with planted SDOH levels.
//!
//! Transcripts are stitched from the sentence bank; the planted level of every
//! subtopic goes to a ground-truth sidecar and never appears in transcript
//! text other than through its phrase. A1C is a linear function of the
//! standardised planted features plus truncated Gaussian noise.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::bank::SentenceBank;
use super::{CorpusError, LabPanel, PatientRecord, Transcript};
use crate::rubric::canonical_labels;
use crate::seed;

/// Lab feature names, in panel order.
pub const LAB_COLUMNS: [&str; 5] = ["Triglycerides", "HDL", "LDL", "Glucose", "Creatinine"];

/// (mean, sd, floor) used to draw each lab.
const LAB_DISTRIBUTIONS: [(f64, f64, f64); 5] =
    [(150.0, 60.0, 40.0), (50.0, 14.0, 20.0), (105.0, 32.0, 30.0), (135.0, 35.0, 60.0), (1.05, 0.3, 0.4)];

/// Probability of planted levels 1..=5.
const LEVEL_PROBS: [f64; 5] = [0.08, 0.17, 0.30, 0.27, 0.18];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_patients: usize,
    pub a1c_mean: f64,
    pub a1c_sd: f64,
    pub a1c_range: [f64; 2],
    pub seed: u64,
    /// Coefficient (A1C percent per standard deviation) keyed by feature name:
    /// a "Topic - Subtopic" label or one of [`LAB_COLUMNS`].
    pub planted_effect_sizes: BTreeMap<String, f64>,
    /// Exact fraction of (patient, subtopic) cells left out of transcripts.
    pub absence_rate: f64,
    /// Probability that a transcript states the A1C value explicitly.
    pub a1c_mention_rate: f64,
    pub lab_missing_rate: f64,
    /// Inclusive range of transcript word counts.
    pub word_range: [usize; 2],
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_patients: 65,
            a1c_mean: 6.83,
            a1c_sd: 1.05,
            a1c_range: [4.5, 10.3],
            seed: 7,
            planted_effect_sizes: BTreeMap::new(),
            absence_rate: 0.17,
            a1c_mention_rate: 0.5,
            lab_missing_rate: 0.03,
            word_range: [236, 1200],
        }
    }
}

impl SyntheticConfig {
    /// A modest planted signal: glucose dominant, a few SDOH effects.
    pub fn planted_signal() -> Self {
        let mut effects = BTreeMap::new();
        effects.insert("Glucose".to_string(), 0.35);
        effects.insert("Creatinine".to_string(), 0.15);
        effects.insert("Triglycerides".to_string(), 0.12);
        effects.insert("Socioeconomic Status - Financial Stress".to_string(), -0.15);
        effects.insert("Diet - Diet Type".to_string(), -0.12);
        effects.insert("Information on Diabetes Management - Medication Adherence".to_string(), -0.12);
        Self { planted_effect_sizes: effects, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let err = |field, message: String| Err(CorpusError::Config { field, message });
        if self.n_patients < 2 {
            return err("n_patients", format!("must be at least 2, got {}", self.n_patients));
        }
        let [lo, hi] = self.a1c_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return err("a1c_range", format!("min must be below max, got [{lo}, {hi}]"));
        }
        if lo < super::A1C_WINDOW.0 || hi > super::A1C_WINDOW.1 {
            return err("a1c_range", "must lie within [3.0, 20.0]".into());
        }
        if !(self.a1c_mean > lo && self.a1c_mean < hi) {
            return err("a1c_mean", format!("{} is outside a1c_range", self.a1c_mean));
        }
        if !(self.a1c_sd.is_finite() && self.a1c_sd > 0.0) {
            return err("a1c_sd", "must be positive".into());
        }
        for (field, rate) in [
            ("absence_rate", self.absence_rate),
            ("a1c_mention_rate", self.a1c_mention_rate),
            ("lab_missing_rate", self.lab_missing_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return err(field, format!("must be within [0, 1], got {rate}"));
            }
        }
        if self.absence_rate >= 1.0 {
            return err("absence_rate", "must leave at least one subtopic present".into());
        }
        let [wmin, wmax] = self.word_range;
        if wmin == 0 || wmin > wmax {
            return err("word_range", format!("invalid range [{wmin}, {wmax}]"));
        }
        let labels = canonical_labels();
        for (name, beta) in &self.planted_effect_sizes {
            if !labels.contains(name) && !LAB_COLUMNS.contains(&name.as_str()) {
                return err("planted_effect_sizes", format!("unknown feature {name:?}"));
            }
            if !beta.is_finite() {
                return err("planted_effect_sizes", format!("{name} coefficient is not finite"));
            }
        }
        Ok(())
    }
}

/// Planted level per subtopic (taxonomy order); −1 where the subtopic was left
/// out of the transcript.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub levels: BTreeMap<String, [i8; 15]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub patients: Vec<PatientRecord>,
    pub ground_truth: GroundTruth,
}

fn level_moments() -> (f64, f64) {
    let mean: f64 = LEVEL_PROBS.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
    let second: f64 = LEVEL_PROBS.iter().enumerate().map(|(i, p)| ((i + 1) as f64).powi(2) * p).sum();
    (mean, (second - mean * mean).sqrt())
}

fn draw_level(rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in LEVEL_PROBS.iter().enumerate() {
        acc += p;
        if u < acc {
            return (i + 1) as u8;
        }
    }
    5
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let mut rng = seed::stream_rng(config.seed, seed::SYNTH);
    let n = config.n_patients;
    let labels = canonical_labels();

    // Exact absence count, spread uniformly over the grid.
    let cells = n * labels.len();
    let n_absent = (config.absence_rate * cells as f64).round() as usize;
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(&mut rng);
    let mut absent = vec![false; cells];
    for &c in &order[..n_absent] {
        absent[c] = true;
    }

    let (level_mean, level_sd) = level_moments();
    let explained: f64 = config.planted_effect_sizes.values().map(|b| b * b).sum();
    let noise_sd = (config.a1c_sd.powi(2) - explained).max(0.01).sqrt();
    let noise = Normal::new(0.0, noise_sd).expect("positive sd");
    let [lo, hi] = config.a1c_range;

    let mut patients = Vec::with_capacity(n);
    let mut truth = GroundTruth::default();
    for p in 0..n {
        let patient_id = format!("P{:03}", p + 1);
        let levels: Vec<u8> = (0..labels.len()).map(|_| draw_level(&mut rng)).collect();
        let present: Vec<bool> = (0..labels.len()).map(|s| !absent[p * labels.len() + s]).collect();

        let mut lab_latent = [0.0; 5];
        let mut lab_values = [None; 5];
        for (i, &(mean, sd, floor)) in LAB_DISTRIBUTIONS.iter().enumerate() {
            let v: f64 = Normal::new(mean, sd).expect("sd > 0").sample(&mut rng);
            let v = v.max(floor);
            lab_latent[i] = v;
            let decimals = if i == 4 { 2 } else { 1 };
            let missing = rng.random::<f64>() < config.lab_missing_rate;
            lab_values[i] = if missing { None } else { Some(round_to(v, decimals)) };
        }

        let mut linear = 0.0;
        for (name, beta) in &config.planted_effect_sizes {
            let z = if let Some(s) = labels.iter().position(|l| l == name) {
                if present[s] {
                    (f64::from(levels[s]) - level_mean) / level_sd
                } else {
                    0.0
                }
            } else {
                let i = LAB_COLUMNS.iter().position(|l| l == name).expect("validated feature name");
                (lab_latent[i] - LAB_DISTRIBUTIONS[i].0) / LAB_DISTRIBUTIONS[i].1
            };
            linear += beta * z;
        }
        let mut a1c = f64::NAN;
        for _ in 0..10_000 {
            let candidate = config.a1c_mean + linear + noise.sample(&mut rng);
            if (lo..=hi).contains(&candidate) {
                a1c = candidate;
                break;
            }
        }
        if a1c.is_nan() {
            a1c = (config.a1c_mean + linear).clamp(lo, hi);
        }
        let a1c = round_to(a1c, 1).clamp(lo, hi);

        let text = compose_transcript(&mut rng, config, &levels, &present, a1c);
        let transcript = Transcript::new(&patient_id, text)?;
        let labs = LabPanel {
            triglycerides: lab_values[0],
            hdl: lab_values[1],
            ldl: lab_values[2],
            glucose: lab_values[3],
            creatinine: lab_values[4],
        };
        patients.push(PatientRecord::new(transcript, labs, a1c)?);

        let mut row = [-1i8; 15];
        for s in 0..labels.len() {
            if present[s] {
                row[s] = levels[s] as i8;
            }
        }
        truth.levels.insert(patient_id, row);
    }
    Ok(SyntheticCorpus { patients, ground_truth: truth })
}

fn compose_transcript(
    rng: &mut ChaCha8Rng,
    config: &SyntheticConfig,
    levels: &[u8],
    present: &[bool],
    a1c: f64,
) -> String {
    // Each unit is a run of sentences kept together.
    let mut units: Vec<Vec<String>> = Vec::new();
    let frames = SentenceBank::frame_count();
    for (s, &lvl) in levels.iter().enumerate() {
        if present[s] {
            units.push(vec![SentenceBank::planted_sentence(s, lvl, rng.random_range(0..frames))]);
        }
    }
    let filler_idx: Vec<usize> = (0..SentenceBank::filler_count()).collect();
    let pick_filler = |rng: &mut ChaCha8Rng| SentenceBank::filler(*filler_idx.choose(rng).unwrap()).to_string();
    if rng.random::<f64>() < config.a1c_mention_rate {
        // fillers on both sides keep other numbers out of the mention window
        let mention = SentenceBank::a1c_mention(rng.random_range(0..4), a1c);
        units.push(vec![pick_filler(rng), mention, pick_filler(rng)]);
    }
    if rng.random::<f64>() < 0.5 {
        units.push(vec![SentenceBank::distractor(rng.random_range(0..4)).to_string()]);
    }
    units.shuffle(rng);

    let target = rng.random_range(config.word_range[0]..=config.word_range[1]);
    let words = |units: &[Vec<String>]| -> usize {
        units.iter().flatten().map(|s| s.split_whitespace().count()).sum()
    };
    let content_units = units.len();
    let mut fillers: Vec<Vec<String>> = Vec::new();
    while words(&units) + words(&fillers) < target {
        fillers.push(vec![pick_filler(rng)]);
    }
    // Interleave: each filler goes after a random position, keeping the
    // relative order of the content units.
    let mut slots: Vec<Vec<Vec<String>>> = vec![Vec::new(); content_units + 1];
    for f in fillers {
        let at = rng.random_range(0..=content_units);
        slots[at].push(f);
    }
    let mut out: Vec<String> = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        out.extend(slot.into_iter().flatten());
        if i < content_units {
            out.extend(units[i].iter().cloned());
        }
    }
    // paragraphs of roughly six sentences
    out.chunks(6).map(|c| c.join(" ")).collect::<Vec<_>>().join("\n\n")
}
