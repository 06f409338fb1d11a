//! File-to-file stages and the end-to-end run that chains them.
//!
//! Each stage reads its input from disk and writes its output to disk, so any
//! stage can be rerun alone or fed with artifacts produced elsewhere.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::config::{PeakConfig, PipelineConfig, SelectionConfig, SynthConfig};
use crate::domain::{DeviceSetting, Hand};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, WindowSpec};
use crate::ingest::{load_hand_export, parse_context_log, render_manifest, IngestOptions};
use crate::matrix::FeatureMatrix;
use crate::models::{evaluate, EvalOptions, EvaluationReport, ModelSpec};
use crate::selection::{context_filter, mrmr_rank, ContextFilterRules, FilterOutcome, MrmrRanking};
use crate::synth::{generate_schedule, read_ground_truth, synthesize_paired_dataset, SynthOptions, SyntheticDataset, GROUND_TRUTH_FILE};
use crate::timeline::{build_labeled_timeline, read_timeline, write_timeline, HandSeries};
use crate::vocab::Vocabulary;

pub const TIMELINE_FILE: &str = "timeline.csv";
pub const MANIFEST_FILE: &str = "ingest_manifest.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const REPORT_DIR: &str = "reports";

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates a dataset and writes it under `dir`. A directory that already
/// holds files must be an earlier synthetic dataset; its exports are replaced.
pub fn synth_stage(cfg: &SynthConfig, dir: &Path) -> Result<SyntheticDataset> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if occupied {
            if !dir.join(GROUND_TRUTH_FILE).exists() {
                return Err(Error::Config(format!(
                    "{}: refusing to write a synthetic dataset into a non-empty directory without {GROUND_TRUTH_FILE}",
                    dir.display()
                )));
            }
            for hand in Hand::ALL {
                let sub = dir.join(hand.as_str());
                if sub.exists() {
                    fs::remove_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
                }
            }
        }
    }
    let schedule = generate_schedule(cfg.days, cfg.seed)?;
    let opts = SynthOptions {
        dominant: cfg.dominant_hand,
        device_setting: cfg.device_setting,
    };
    let ds = synthesize_paired_dataset(&schedule, &cfg.asymmetry, cfg.seed, &opts)?;
    ds.write(dir)?;
    Ok(ds)
}

/// Dominant hand and device setting from the config, falling back to the
/// ground-truth file a synthetic dataset carries.
pub fn resolve_labels(cfg: &PipelineConfig) -> Result<(Hand, DeviceSetting)> {
    let gt_path = cfg.input_dir.join(GROUND_TRUTH_FILE);
    let gt = if gt_path.exists() { Some(read_ground_truth(&gt_path)?) } else { None };
    let hand = match (cfg.dominant_hand, gt) {
        (Some(h), _) => h,
        (None, Some((h, _))) => h,
        (None, None) => {
            return Err(Error::Config(format!(
                "dominant_hand is not set and {} does not exist",
                gt_path.display()
            )))
        }
    };
    let setting = cfg
        .device_setting
        .or(gt.map(|g| g.1))
        .unwrap_or(DeviceSetting::ConfiguredPerHand);
    Ok((hand, setting))
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub manifest: String,
    pub seconds: usize,
    pub dominant: Hand,
    pub device_setting: DeviceSetting,
    pub rejected: usize,
}

/// Exports and context log → labeled 1-second timeline file.
pub fn ingest_stage(cfg: &PipelineConfig, out: &Path) -> Result<IngestSummary> {
    let (dominant, device_setting) = resolve_labels(cfg)?;
    let opts = IngestOptions {
        time_shift_s: cfg.time_shift_s,
    };
    let left = load_hand_export(&cfg.input_dir, Hand::Left, opts)?;
    let right = load_hand_export(&cfg.input_dir, Hand::Right, opts)?;
    let manifest = render_manifest(&[&left, &right]);
    let rejected: usize = [&left, &right]
        .iter()
        .flat_map(|h| h.channels())
        .map(|c| c.stats.rejected())
        .sum();
    if rejected > 0 {
        warn!("{rejected} export records rejected; see the manifest");
    }
    let entries = parse_context_log(&cfg.context_log_path(), &cfg.vocab)?;
    let tl = build_labeled_timeline(
        &HandSeries::from(left),
        &HandSeries::from(right),
        &entries,
        dominant,
        device_setting,
        &cfg.vocab,
        &cfg.timeline,
    )?;
    create_parent(out)?;
    write_timeline(out, &tl)?;
    info!("timeline: {} seconds written to {}", tl.len(), out.display());
    Ok(IngestSummary {
        manifest,
        seconds: tl.len(),
        dominant,
        device_setting,
        rejected,
    })
}

/// Timeline file → feature CSV.
pub fn featurize_stage(timeline: &Path, window: &WindowSpec, peaks: &PeakConfig, out: &Path) -> Result<FeatureMatrix<f64>> {
    let tl = read_timeline(timeline)?;
    let fm = build_feature_matrix(&tl, window, &peaks.feature_options())?;
    create_parent(out)?;
    fm.write_csv(out)?;
    info!("features: {} rows at {} windows", fm.n_rows(), window.label());
    Ok(fm)
}

/// Feature CSV → feature CSV holding only the rows the rules keep.
pub fn filter_stage(features: &Path, rules: &ContextFilterRules, vocab: &Vocabulary, out: &Path) -> Result<FilterOutcome<f64>> {
    rules.validate(vocab)?;
    let fm = FeatureMatrix::<f64>::read_csv(features)?;
    let outcome = context_filter(&fm, rules)?;
    create_parent(out)?;
    outcome.matrix.write_csv(out)?;
    info!("filter: kept {} of {} rows", outcome.matrix.n_rows(), fm.n_rows());
    Ok(outcome)
}

/// Feature CSV → ranking CSV with the first `top_k` rows marked selected
/// (every row when `top_k` is 0).
pub fn rank_stage(features: &Path, selection: &SelectionConfig, out: &Path) -> Result<MrmrRanking> {
    selection.validate()?;
    let fm = FeatureMatrix::<f64>::read_csv(features)?;
    let fm = fm.drop_columns(&selection.exclude);
    let ranking = mrmr_rank(&fm, selection.scheme, &selection.discretization)?;
    let k = if selection.top_k == 0 { ranking.entries.len() } else { selection.top_k };
    write_text(out, &ranking.to_csv(k))?;
    Ok(ranking)
}

/// Names marked selected in a ranking CSV, in rank order.
pub fn read_selected(ranking: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(ranking).map_err(|e| Error::io(ranking, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("rank,feature,score,selected") {
        return Err(Error::parse(ranking, "expected header rank,feature,score,selected"));
    }
    let mut names = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        match f.as_slice() {
            [_, name, _, "1"] => names.push(name.to_string()),
            [_, _, _, "0"] => {}
            _ => return Err(Error::parse(ranking, format!("line {}: malformed ranking row", i + 2))),
        }
    }
    if names.is_empty() {
        return Err(Error::parse(ranking, "no features marked selected"));
    }
    Ok(names)
}

/// Feature CSV (optionally narrowed to `columns`) → evaluation report JSON.
pub fn train_stage(features: &Path, columns: Option<&[String]>, spec: &ModelSpec, eval: &EvalOptions, out: &Path) -> Result<EvaluationReport> {
    spec.hyperparams()?;
    let fm = FeatureMatrix::<f64>::read_csv(features)?;
    let fm = match columns {
        Some(c) => fm.select_columns(c)?,
        None => fm,
    };
    let report = evaluate(&fm, spec, eval)?;
    create_parent(out)?;
    report.write(out)?;
    Ok(report)
}

/// Concatenated summaries of report files, in the order given.
pub fn report_stage(reports: &[PathBuf]) -> Result<String> {
    let mut out = String::new();
    for (i, p) in reports.iter().enumerate() {
        let r = EvaluationReport::read(p)?;
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "== {}", p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()).unwrap();
        out.push_str(&r.summary());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub timeline: PathBuf,
    pub features: PathBuf,
    pub filtered: PathBuf,
    pub ranking_file: PathBuf,
    pub report_files: Vec<PathBuf>,
    pub summary: PathBuf,
    pub rows: usize,
    pub filtered_rows: usize,
    pub ranking: MrmrRanking,
    pub selected: Vec<String>,
    pub reports: Vec<EvaluationReport>,
}

/// Synth (when configured) → ingest → featurize → filter → rank → train
/// every configured model on the selected features → summary.
///
/// Ranking runs on the filtered rows, the same rows the classifiers see.
pub fn run(cfg: &PipelineConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let window = cfg.window.spec()?;
    if let Some(s) = &cfg.synth {
        synth_stage(s, &cfg.input_dir)?;
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let timeline = out.join(TIMELINE_FILE);
    let ingest = ingest_stage(cfg, &timeline)?;
    write_text(&out.join(MANIFEST_FILE), &ingest.manifest)?;

    let label = window.label();
    let features = out.join(format!("features_{label}.csv"));
    let rows = featurize_stage(&timeline, &window, &cfg.peaks, &features)?.n_rows();
    let filtered = out.join(format!("filtered_{label}.csv"));
    let filtered_rows = filter_stage(&features, &cfg.filter, &cfg.vocab, &filtered)?.matrix.n_rows();
    let ranking_file = out.join(format!("ranking_{label}.csv"));
    let ranking = rank_stage(&filtered, &cfg.selection, &ranking_file)?;
    let selected = read_selected(&ranking_file)?;
    info!("selected features: {}", selected.join(", "));

    let mut report_files = Vec::new();
    let mut reports = Vec::new();
    for (i, spec) in cfg.models.iter().enumerate() {
        let path = out.join(REPORT_DIR).join(format!("{:02}_{}.json", i + 1, spec.kind));
        let t = Instant::now();
        let r = train_stage(&filtered, Some(&selected), spec, &cfg.eval, &path)?;
        info!(
            "{}: cv {:.4}, test {:.4} ({:.1} s)",
            spec.kind,
            r.cv_accuracy,
            r.test_accuracy,
            t.elapsed().as_secs_f64()
        );
        report_files.push(path);
        reports.push(r);
    }
    let summary = out.join(SUMMARY_FILE);
    write_text(&summary, &report_stage(&report_files)?)?;
    info!("pipeline finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(RunOutcome {
        timeline,
        features,
        filtered,
        ranking_file,
        report_files,
        summary,
        rows,
        filtered_rows,
        ranking,
        selected,
        reports,
    })
}
