mod support;

use std::fs;

use support::{pipeline, sdoh, stderr, write_figure_logs};

#[test]
fn synth_is_deterministic_across_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&["synth"], &["--seed", "3"], &a);
    pipeline(&["synth"], &["--seed", "3"], &b);
    for f in ["corpus/patients.csv", "corpus/ground_truth.csv", "corpus/stats.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    pipeline(&["synth"], &["--seed", "4"], &c);
    assert_ne!(fs::read(a.join("corpus/patients.csv")).unwrap(), fs::read(c.join("corpus/patients.csv")).unwrap());
}

#[test]
fn missing_output_directory_is_created() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deep/nested/run");
    pipeline(&["synth"], &[], &out);
    assert!(out.join("manifest.json").exists());
    assert_eq!(fs::read_dir(out.join("corpus/transcripts")).unwrap().count(), 65);
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "sede = 3\n").unwrap();
    let o = sdoh(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("sede"), "{}", stderr(&o));

    fs::write(&cfg, "[train]\nn_folds = 1\n").unwrap();
    let o = sdoh(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.n_folds"), "{}", stderr(&o));

    let o = sdoh(&["synth", "--parallel", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = sdoh(&["train", "--model", "svm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn live_backend_requires_an_api_key() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(&["synth"], &[], dir.path());
    let o = sdoh(&["themes", "--backend", "live"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SDOH_API_KEY"), "{}", stderr(&o));
}

#[test]
fn downstream_command_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdoh(&["themes"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `sdoh synth` first"), "{}", stderr(&o));

    let o = sdoh(&["report"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn edited_upstream_artifact_is_reported_stale() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(&["synth"], &[], dir.path());
    let patients = dir.path().join("corpus/patients.csv");
    let mut text = fs::read_to_string(&patients).unwrap();
    text.push('\n');
    fs::write(&patients, text).unwrap();
    let o = sdoh(&["themes"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("changed since it was recorded"), "{}", stderr(&o));
}

#[test]
fn report_renders_accuracy_from_prediction_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_figure_logs(dir.path());
    let o = sdoh(&["report", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = fs::read_to_string(dir.path().join("report/accuracy.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(
        rows,
        [
            "gpt-4o,0,11,34,43,5,11,39,65,0",
            "o1,1,11,30,43,4,11,35,65,0",
            "o1-mini,0,10,26,40,5,11,31,61,4",
            "deepseek-r1,0,11,29,43,4,11,33,65,0",
        ]
    );
    let summary = fs::read_to_string(dir.path().join("report/summary.md")).unwrap();
    for cell in ["60.0% (39/65)", "53.8% (35/65)", "50.8% (31/61)", "50.8% (33/65)", "0.0% (0/11)"] {
        assert!(summary.contains(cell), "{cell} missing from\n{summary}");
    }
    let confusion = fs::read_to_string(dir.path().join("report/confusion.csv")).unwrap();
    assert!(confusion.contains("gpt-4o,low,0,11,0,0"), "{confusion}");
    assert!(confusion.contains("o1-mini,medium,14,26,0,3"), "{confusion}");
}

#[test]
fn combined_training_reports_every_model() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(&["synth", "themes", "rate", "features"], &[], dir.path());
    pipeline(&["train"], &["--feature-set", "combined", "--model", "all"], dir.path());
    pipeline(&["report"], &[], dir.path());

    let r2 = fs::read_to_string(dir.path().join("report/r2.csv")).unwrap();
    let models: Vec<&str> = r2.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["ridge", "lasso", "rf", "gbt"]);
    let header: Vec<&str> = r2.lines().next().unwrap().split(',').collect();
    let train = header.iter().position(|h| *h == "combined_train").unwrap();
    for line in r2.lines().skip(1) {
        let v: f64 = line.split(',').nth(train).unwrap().parse().unwrap();
        assert!(v <= 1.0);
    }
    let importance = fs::read_to_string(dir.path().join("report/importance.csv")).unwrap();
    assert!(importance.lines().any(|l| l.starts_with("combined,rf,1,")));
    assert!(importance.lines().any(|l| l.starts_with("combined,gbt,1,")));
    let coverage = fs::read_to_string(dir.path().join("report/coverage.csv")).unwrap();
    assert_eq!(coverage.lines().count(), 16);

    // the trained artifact reloads and the manifest names it
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("train/combined/gbt/model.json"));
    let model = fs::read_to_string(dir.path().join("train/combined/gbt/model.json")).unwrap();
    sdoh_core::models::FittedModel::from_json(&model).unwrap();
}

#[test]
fn parallel_run_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("serial"), dir.path().join("parallel"));
    let steps = ["synth", "themes", "rate", "features", "control"];
    pipeline(&steps, &[], &a);
    pipeline(&steps, &["--parallel", "4"], &b);
    pipeline(&["train"], &["--feature-set", "labs", "--model", "rf"], &a);
    pipeline(&["train"], &["--feature-set", "labs", "--model", "rf", "--parallel", "4"], &b);
    for f in ["rate/ratings.csv", "control/gpt-4o/predictions.jsonl", "train/labs/rf/model.json", "train/labs/rf/cv.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
