use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use domhand::ingest::{context_log_to_string, write_series_by_day, ContextEntry, RawSample, RawSampleSeries};
use domhand::models::EvaluationReport;
use domhand::synth::CONTEXT_LOG_FILE;
use domhand::{Channel, FeatureMatrix64, Hand};
use domhand_cli::{run_cli, EXIT_IO, EXIT_OK, EXIT_VALIDATION};

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("domhand").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn t0() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2022, 11, 3).unwrap().and_hms_opt(10, 0, 0).unwrap()
}

/// Both hands sampled over 10:00-12:00 inclusive, one context entry.
fn two_hour_export(root: &Path) {
    for hand in [Hand::Left, Hand::Right] {
        for (channel, every) in [(Channel::HeartRate, 5), (Channel::Steps, 60), (Channel::Calories, 60)] {
            let samples = (0..=7_200 / every)
                .map(|k| RawSample {
                    timestamp: t0() + Duration::seconds(k * every),
                    value: if channel == Channel::HeartRate { 70.0 + (k % 9) as f64 } else { (k % 4) as f64 },
                    confidence: (channel == Channel::HeartRate).then_some(2),
                })
                .collect();
            write_series_by_day(root, &RawSampleSeries { channel, hand, samples }).unwrap();
        }
    }
    let mut entry = ContextEntry::new(t0());
    entry.location = Some("office".into());
    entry.activities = vec!["working".into()];
    fs::write(root.join(CONTEXT_LOG_FILE), context_log_to_string(&[entry])).unwrap();
}

#[test]
fn two_hour_timeline_gives_twenty_four_ten_minute_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (input, tl, feats) = (dir.path().join("in"), dir.path().join("timeline.csv"), dir.path().join("f.csv"));
    two_hour_export(&input);
    assert_eq!(cli(&["ingest", "--input", p(&input), "--out", p(&tl), "--dominant", "right"]), EXIT_OK);
    assert_eq!(cli(&["featurize", "--timeline", p(&tl), "--window", "10m", "--out", p(&feats)]), EXIT_OK);
    let fm = FeatureMatrix64::read_csv(&feats).unwrap();
    assert_eq!(fm.n_rows(), 24);
    assert_eq!(fm.column_names().len(), 25);
}

#[test]
fn stage_by_stage_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = d.join("synth");
    assert_eq!(cli(&["synth", "--out", p(&input), "--days", "2", "--seed", "3"]), EXIT_OK);
    let tl = d.join("timeline.csv");
    assert_eq!(cli(&["ingest", "--input", p(&input), "--out", p(&tl)]), EXIT_OK);
    let feats = d.join("features");
    assert_eq!(cli(&["featurize", "--timeline", p(&tl), "--window", "1m", "--window", "5m", "--out-dir", p(&feats)]), EXIT_OK);
    assert!(feats.join("features_1m.csv").exists());
    let five = feats.join("features_5m.csv");
    let filtered = d.join("filtered.csv");
    assert_eq!(cli(&["filter", "--features", p(&five), "--out", p(&filtered)]), EXIT_OK);

    let ranking = d.join("ranking.csv");
    let chart = d.join("chart.tsv");
    assert_eq!(cli(&["rank", "--features", p(&filtered), "--out", p(&ranking), "--top", "4", "--chart", p(&chart)]), EXIT_OK);
    let text = fs::read_to_string(&ranking).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 25);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",1")).count(), 4);
    assert!(rows[..4].iter().all(|r| r.ends_with(",1")));

    let report = d.join("reports/svm.json");
    let train = [
        "train", "--features", p(&filtered), "--out", p(&report), "--model", "quadratic_svm", "--ranking", p(&ranking), "--cv", "3",
    ];
    assert_eq!(cli(&train), EXIT_OK);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json.get("cv_confusion").is_some() && json.get("test_confusion").is_some());
    let parsed = EvaluationReport::read(&report).unwrap();
    assert_eq!(parsed.features.len(), 4);

    let summary = d.join("summary.txt");
    assert_eq!(cli(&["report", p(&report), "--out", p(&summary)]), EXIT_OK);
    assert!(fs::read_to_string(&summary).unwrap().contains("quadratic_svm"));
}

#[test]
fn run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        r#"
input_dir = "input"
output_dir = "output"
models = [{ kind = "coarse_tree" }]

[window]
length = "5m"

[synth]
days = 1
seed = 2
"#,
    )
    .unwrap();
    assert_eq!(cli(&["run", "--config", p(&config)]), EXIT_OK);
    let out = dir.path().join("output");
    assert!(out.join("summary.txt").exists());
    assert!(out.join("ranking_5m.csv").exists());
}

#[test]
fn exit_codes_separate_usage_from_io() {
    let dir = tempfile::tempdir().unwrap();
    let tl = dir.path().join("missing.csv");
    let out = dir.path().join("f.csv");
    assert_eq!(cli(&["--help"]), EXIT_OK);
    assert_eq!(cli(&["no-such-command"]), EXIT_VALIDATION);
    assert_eq!(cli(&["featurize", "--timeline", p(&tl), "--window", "7m", "--out", p(&out)]), EXIT_VALIDATION);
    assert_eq!(cli(&["featurize", "--timeline", p(&tl), "--window", "1m", "--out", p(&out)]), EXIT_IO);
    assert_eq!(cli(&["synth", "--out", p(dir.path()), "--days", "0"]), EXIT_VALIDATION);
    assert_eq!(cli(&["train", "--features", p(&tl), "--out", p(&out), "--model", "random_forest"]), EXIT_VALIDATION);
    assert_eq!(cli(&["serve-survey", "--log", p(&out), "--bind", "0.0.0.0:8765"]), EXIT_VALIDATION);
    assert!(!out.exists());
}
