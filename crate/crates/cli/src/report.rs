//! `report`: coverage, R², importance and accuracy tables plus a summary.

use std::fmt::Write as _;

use sdoh_core::control::{accuracy_csv, confusion_matrix, evaluate_accuracy, parse_prediction_log, AccuracyTable, ConfusionMatrix};
use sdoh_core::features::FeatureSet;
use sdoh_core::models::ModelKind;
use sdoh_core::rag::CoverageStats;
use sdoh_core::ControlLevel;

use crate::stages::{control_labels, control_stage, train_stage, Context, TrainSummary};
use crate::CliError;

fn read(ctx: &Context, rel: &str) -> Result<String, CliError> {
    let path = ctx.out().join(rel);
    std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn r3(x: f64) -> String {
    format!("{x:.3}")
}

pub struct Importance {
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    /// (rank, feature, importance)
    pub rows: Vec<(usize, String, f64)>,
}

pub fn report(ctx: &mut Context) -> Result<(), CliError> {
    let out = ctx.out().to_path_buf();
    let mut w = ctx.writer("report");
    let mut summary = String::from("# SDOH pipeline report\n");
    let mut sections = 0;

    // ---- subtopic coverage
    if ctx.manifest.stages.contains_key("rate") {
        let rec = ctx.manifest.require(&out, "rate", "rate")?;
        w.input_digest("rate/coverage.json", rec.outputs.get("rate/coverage.json").cloned().unwrap_or_default());
        let cov: CoverageStats = serde_json::from_str(&read(ctx, "rate/coverage.json")?)?;
        let rows: Vec<Vec<String>> = cov
            .subtopics
            .iter()
            .map(|s| vec![s.topic.clone(), s.subtopic.clone(), s.present.to_string(), s.total.to_string(), format!("{:.1}", s.percent)])
            .collect();
        w.write("report/coverage.csv", csv_bytes(&["topic", "subtopic", "present", "total", "percent"], &rows))?;
        let _ = writeln!(
            summary,
            "\n## Subtopic coverage\n\n{} of {} patient × subtopic cells have no rating ({:.1}%).\n\n| Topic | Subtopic | Present |\n|---|---|---|",
            cov.missing_cells,
            cov.total_cells,
            100.0 * cov.missing_fraction
        );
        for s in &cov.subtopics {
            let _ = writeln!(summary, "| {} | {} | {:.1}% ({}/{}) |", s.topic, s.subtopic, s.percent, s.present, s.total);
        }
        sections += 1;
    }

    // ---- regression R²
    let mut trained: Vec<TrainSummary> = Vec::new();
    for set in FeatureSet::ALL {
        for kind in ModelKind::ALL {
            let stage = train_stage(set, kind);
            if !ctx.manifest.stages.contains_key(&stage) {
                continue;
            }
            let rec = ctx.manifest.require(&out, &stage, "train")?;
            let rel = format!("{stage}/cv.json");
            w.input_digest(rel.clone(), rec.outputs.get(&rel).cloned().unwrap_or_default());
            trained.push(serde_json::from_str(&read(ctx, &rel)?)?);
        }
    }
    let mut importances = Vec::new();
    if !trained.is_empty() {
        let cell = |kind: ModelKind, set: FeatureSet, f: fn(&TrainSummary) -> Option<f64>| {
            trained.iter().find(|t| t.model == kind && t.feature_set == set).and_then(f).map(r3).unwrap_or_default()
        };
        let mut header = vec!["model".to_string()];
        for set in FeatureSet::ALL {
            header.push(format!("{}_train", set.as_str()));
            header.push(format!("{}_cv", set.as_str()));
        }
        for set in FeatureSet::ALL {
            header.push(format!("{}_test", set.as_str()));
        }
        let mut rows = Vec::new();
        let _ = writeln!(
            summary,
            "\n## Regression R² (train / mean {}-fold CV)\n\n| Model | SDOH train | SDOH CV | Labs train | Labs CV | Combined train | Combined CV |\n|---|---|---|---|---|---|---|",
            trained[0].n_folds
        );
        for kind in ModelKind::ALL {
            if !trained.iter().any(|t| t.model == kind) {
                continue;
            }
            let mut row = vec![kind.as_str().to_string()];
            let mut md = format!("| {} |", kind.display_name());
            for set in FeatureSet::ALL {
                let tr = cell(kind, set, |t| Some(t.train_r2));
                let cv = cell(kind, set, |t| Some(t.cv_r2));
                let _ = write!(md, " {tr} | {cv} |");
                row.push(tr);
                row.push(cv);
            }
            for set in FeatureSet::ALL {
                row.push(cell(kind, set, |t| t.test_r2));
            }
            summary.push_str(&md);
            summary.push('\n');
            rows.push(row);
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        w.write("report/r2.csv", csv_bytes(&header_refs, &rows))?;
        if trained.iter().any(|t| t.linear_grid_extension) {
            summary.push_str("\nRidge and lasso penalties were also chosen by grid search.\n");
        }

        // ---- importance
        for t in trained.iter().filter(|t| t.model.is_tree()) {
            let rel = format!("{}/importance.csv", train_stage(t.feature_set, t.model));
            let text = read(ctx, &rel)?;
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
                let rank = rec[0].parse().map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
                let value = rec[2].parse().map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
                rows.push((rank, rec[1].to_string(), value));
            }
            importances.push(Importance { feature_set: t.feature_set, model: t.model, rows });
        }
        if !importances.is_empty() {
            let rows: Vec<Vec<String>> = importances
                .iter()
                .flat_map(|imp| {
                    imp.rows.iter().map(move |(rank, f, v)| {
                        vec![imp.feature_set.as_str().into(), imp.model.as_str().into(), rank.to_string(), f.clone(), format!("{v:.6}")]
                    })
                })
                .collect();
            w.write("report/importance.csv", csv_bytes(&["feature_set", "model", "rank", "feature", "importance"], &rows))?;
            summary.push_str("\n## Variance-reduction importance (top 5)\n");
            for imp in &importances {
                let _ = writeln!(summary, "\n**{} — {}**\n", imp.model.display_name(), imp.feature_set.as_str());
                for (rank, f, v) in imp.rows.iter().take(5) {
                    let _ = writeln!(summary, "{rank}. {f} ({v:.3})");
                }
            }
        }
        sections += 1;
    }

    // ---- control-level accuracy
    let on_disk = control_labels(&out);
    let mut labels: Vec<String> = ctx.cfg.control.models.iter().filter(|l| on_disk.contains(l)).cloned().collect();
    labels.extend(on_disk.iter().filter(|l| !labels.contains(l)).cloned().collect::<Vec<_>>());
    let mut tables: Vec<(AccuracyTable, ConfusionMatrix)> = Vec::new();
    for label in &labels {
        let stage = control_stage(label);
        if ctx.manifest.stages.contains_key(&stage) {
            ctx.manifest.require(&out, &stage, "control")?;
        }
        let rel = format!("{stage}/predictions.jsonl");
        let path = out.join(&rel);
        w.input_file(rel.clone(), &path)?;
        let preds = parse_prediction_log(&read(ctx, &rel)?).map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        let table = evaluate_accuracy(label, &preds)?;
        tables.push((table, confusion_matrix(&preds)));
    }
    if !tables.is_empty() {
        let only: Vec<AccuracyTable> = tables.iter().map(|(t, _)| t.clone()).collect();
        w.write("report/accuracy.csv", accuracy_csv(&only))?;
        let mut rows = Vec::new();
        for (t, m) in &tables {
            for truth in ControlLevel::ALL {
                let r = m.row(truth);
                rows.push(vec![
                    t.model.clone(),
                    truth.as_str().into(),
                    r[0].to_string(),
                    r[1].to_string(),
                    r[2].to_string(),
                    m.non_response[truth.index()].to_string(),
                ]);
            }
        }
        w.write(
            "report/confusion.csv",
            csv_bytes(&["model", "true_level", "pred_low", "pred_medium", "pred_high", "non_response"], &rows),
        )?;
        summary.push_str(
            "\n## Control-level accuracy\n\n| Model | Low | Medium | High | Overall | Non-responses |\n|---|---|---|---|---|---|\n",
        );
        for (t, _) in &tables {
            let _ = writeln!(
                summary,
                "| {} | {} | {} | {} | {} | {} |",
                t.model,
                t.class(ControlLevel::Low),
                t.class(ControlLevel::Medium),
                t.class(ControlLevel::High),
                t.overall,
                t.non_response
            );
        }
        sections += 1;
    }

    if sections == 0 {
        return Err(CliError::Dependency { artifact: "rate, train or control outputs".into(), command: "rate".into() });
    }
    w.write("report/summary.md", summary)?;
    let rec = w.finish();
    ctx.record("report", rec);
    eprintln!("report: {} section(s) written to {}", sections, out.join("report").display());
    Ok(())
}
