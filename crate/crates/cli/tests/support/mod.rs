//! Shared helpers for the CLI integration and acceptance tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use sdoh_core::control::{prediction_log, ControlPrediction};
use sdoh_core::llm::PredictedA1C;
use sdoh_core::ControlLevel;

/// Per-class (correct, responded) counts and non-responses for each model
/// in the published accuracy table.
pub const FIGURE_MODELS: [(&str, [(usize, usize); 3], [usize; 3]); 4] = [
    ("gpt-4o", [(0, 11), (34, 43), (5, 11)], [0, 0, 0]),
    ("o1", [(1, 11), (30, 43), (4, 11)], [0, 0, 0]),
    ("o1-mini", [(0, 10), (26, 40), (5, 11)], [1, 3, 0]),
    ("deepseek-r1", [(0, 11), (29, 43), (4, 11)], [0, 0, 0]),
];

fn typical(level: ControlLevel) -> f64 {
    match level {
        ControlLevel::Low => 5.4,
        ControlLevel::Medium => 6.8,
        ControlLevel::High => 8.6,
    }
}

/// Predictions with exactly the given counts. Wrong answers predict Medium,
/// or Low when the truth is Medium.
pub fn predictions(cells: [(usize, usize); 3], missing: [usize; 3]) -> Vec<ControlPrediction> {
    let mut out = Vec::new();
    for level in ControlLevel::ALL {
        let (correct, total) = cells[level.index()];
        let wrong = if level == ControlLevel::Medium { typical(ControlLevel::Low) } else { typical(ControlLevel::Medium) };
        let mut push = |id: String, value: Option<f64>| {
            let p = PredictedA1C { value, justification: "fixture".into(), quotes: Vec::new() };
            out.push(ControlPrediction::new(id, p, typical(level)).unwrap());
        };
        for i in 0..total {
            push(format!("{}-{i:02}", level.as_str()), Some(if i < correct { typical(level) } else { wrong }));
        }
        for i in 0..missing[level.index()] {
            push(format!("{}-nr{i}", level.as_str()), None);
        }
    }
    out
}

/// Writes `control/<label>/predictions.jsonl` for every model in the table
/// and a config listing them in table order; returns the config path.
pub fn write_figure_logs(out: &Path) -> std::path::PathBuf {
    for (label, cells, missing) in FIGURE_MODELS {
        let dir = out.join("control").join(label);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("predictions.jsonl"), prediction_log(&predictions(cells, missing))).unwrap();
    }
    let labels: Vec<String> = FIGURE_MODELS.iter().map(|(l, _, _)| format!("{l:?}")).collect();
    let cfg = out.join("figure.toml");
    std::fs::write(&cfg, format!("[control]\nmodels = [{}]\n", labels.join(", "))).unwrap();
    cfg
}

pub fn sdoh(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdoh"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SDOH_API_KEY")
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("sdoh binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs each command in order, panicking with stderr on the first failure.
pub fn pipeline(commands: &[&str], extra: &[&str], out: &Path) {
    for c in commands {
        let mut args = vec![*c];
        args.extend_from_slice(extra);
        let o = sdoh(&args, out);
        assert!(o.status.success(), "sdoh {c} failed: {}", stderr(&o));
    }
}
