//! Command-line front end: one subcommand per pipeline stage, an end-to-end
//! `run`, and the self-report capture endpoint.

pub mod server;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use domhand::config::{PeakConfig, PipelineConfig, SelectionConfig, SynthConfig, WindowConfig};
use domhand::contextlog::ContextLog;
use domhand::models::{EvalOptions, ModelSpec, SplitMode};
use domhand::pipeline;
use domhand::selection::{BinStrategy, ContextFilterRules, MrmrScheme};
use domhand::synth::AsymmetryParams;
use domhand::{DeviceSetting, Hand, Vocabulary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

pub const DEFAULT_BIND: &str = "127.0.0.1:8765";

#[derive(Debug, Parser)]
#[command(name = "domhand", version, about = "Dominant-hand prediction from paired wrist-worn device exports")]
pub struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a paired synthetic dataset in the export format.
    Synth(SynthArgs),
    /// Parse both hands' exports and the context log into a timeline file.
    Ingest(IngestArgs),
    /// Window a timeline file into a feature CSV per window length.
    Featurize(FeaturizeArgs),
    /// Keep the rows of a feature CSV that pass the context rules.
    Filter(FilterArgs),
    /// Rank the features of a feature CSV by MRMR.
    Rank(RankArgs),
    /// Cross-validate, fit and hold-out test one model; write a report.
    Train(TrainArgs),
    /// Render summaries of report files.
    Report(ReportArgs),
    /// Serve the self-report capture endpoint.
    ServeSurvey(ServeArgs),
    /// Run every stage from a config file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 14)]
    pub days: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "right")]
    pub dominant: String,
    #[arg(long, default_value = "configured_per_hand")]
    pub device_setting: String,
    /// Zero every asymmetry: the hands differ only by sensor noise.
    #[arg(long)]
    pub null: bool,
    #[arg(long)]
    pub hr_peak_rate_boost: Option<f64>,
    #[arg(long)]
    pub hr_noise_boost: Option<f64>,
    #[arg(long)]
    pub step_undercount_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline config supplying defaults (vocabularies, rules, options).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Export root with `<hand>/<channel>/*.json`.
    #[arg(long)]
    pub input: PathBuf,
    /// Timeline file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `context_log.csv` inside the export root.
    #[arg(long)]
    pub context_log: Option<PathBuf>,
    #[arg(long)]
    pub dominant: Option<String>,
    #[arg(long)]
    pub device_setting: Option<String>,
    #[arg(long)]
    pub time_shift_s: Option<i64>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub timeline: PathBuf,
    /// Window length such as `1m`, `10m`, `90s`; repeat for several.
    #[arg(long)]
    pub window: Vec<String>,
    /// Accept window lengths outside 1, 5, 10, 20 and 40 minutes.
    #[arg(long)]
    pub allow_custom_window: bool,
    #[arg(long)]
    pub min_valid_fraction: Option<f64>,
    /// Output file; only with a single window.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Writes `features_<window>.csv` per window.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only these activities (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub whitelist: Option<Vec<String>>,
    /// Replace the excluded activities (comma separated; empty for none).
    #[arg(long, value_delimiter = ',')]
    pub exclude_activities: Option<Vec<String>>,
    /// Replace the columns that must be non-zero (comma separated; empty for none).
    #[arg(long, value_delimiter = ',')]
    pub require_nonzero: Option<Vec<String>>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of features marked selected; 0 marks all.
    #[arg(long)]
    pub top: Option<usize>,
    /// Features to drop before ranking (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub exclude: Option<Vec<String>>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// `quantile` or `equal_width`.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Also write a tab-separated bar-chart table.
    #[arg(long)]
    pub chart: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: String,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub cv: Option<usize>,
    /// Held-out test fraction.
    #[arg(long)]
    pub test: Option<f64>,
    /// `random` or `grouped`.
    #[arg(long)]
    pub split_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on the features a ranking file marks selected.
    #[arg(long, conflicts_with = "columns")]
    pub ranking: Option<PathBuf>,
    /// Train on these feature columns (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Context log to append to; created when missing.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = DEFAULT_BIND)]
    pub bind: String,
    /// Permit binding to a non-loopback address.
    #[arg(long)]
    pub allow_remote: bool,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub allow_custom_window: bool,
}

/// A failed command: exit status and a message naming the file or flag.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<domhand::Error> for Failure {
    fn from(e: domhand::Error) -> Self {
        Failure {
            code: if e.is_io() { EXIT_IO } else { EXIT_VALIDATION },
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn flag(flag: &str, err: impl Display) -> Failure {
        Failure {
            code: EXIT_VALIDATION,
            message: format!("{flag}: {err}"),
        }
    }

    fn io(path: &Path, err: impl Display) -> Failure {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn parse_flag<T: FromStr>(flag: &str, value: &str) -> Result<T, Failure>
where
    T::Err: Display,
{
    value.parse().map_err(|e| Failure::flag(flag, e))
}

fn load_config(arg: &ConfigArg) -> Result<Option<PipelineConfig>, Failure> {
    match &arg.config {
        Some(p) => Ok(Some(PipelineConfig::load(p)?)),
        None => Ok(None),
    }
}

fn vocab_of(cfg: &Option<PipelineConfig>) -> Vocabulary {
    cfg.as_ref().map(|c| c.vocab.clone()).unwrap_or_default()
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_secs()
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Featurize(a) => featurize(a),
        Command::Filter(a) => filter(a),
        Command::Rank(a) => rank(a),
        Command::Train(a) => train(a),
        Command::Report(a) => report(a),
        Command::ServeSurvey(a) => serve(a),
        Command::Run(a) => run(a),
    }
}

fn synth(a: SynthArgs) -> CmdResult {
    let mut asym = if a.null { AsymmetryParams::none() } else { AsymmetryParams::default() };
    if let Some(v) = a.hr_peak_rate_boost {
        asym.hr_peak_rate_boost = v;
    }
    if let Some(v) = a.hr_noise_boost {
        asym.hr_noise_boost = v;
    }
    if let Some(v) = a.step_undercount_factor {
        asym.step_undercount_factor = v;
    }
    asym.validate().map_err(|e| Failure::flag("asymmetry flags", e))?;
    if a.days == 0 {
        return Err(Failure::flag("--days", "must be at least 1"));
    }
    let cfg = SynthConfig {
        days: a.days,
        seed: a.seed,
        dominant_hand: parse_flag::<Hand>("--dominant", &a.dominant)?,
        device_setting: parse_flag::<DeviceSetting>("--device-setting", &a.device_setting)?,
        asymmetry: asym,
    };
    let ds = pipeline::synth_stage(&cfg, &a.out)?;
    println!(
        "wrote {} days ({} context entries) to {}",
        ds.days,
        ds.context.len(),
        a.out.display()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> CmdResult {
    let mut cfg = load_config(&a.config)?.unwrap_or_else(|| PipelineConfig::new(&a.input, ""));
    cfg.input_dir = a.input.clone();
    if let Some(p) = a.context_log {
        cfg.context_log = Some(p);
    }
    if let Some(d) = &a.dominant {
        cfg.dominant_hand = Some(parse_flag("--dominant", d)?);
    }
    if let Some(s) = &a.device_setting {
        cfg.device_setting = Some(parse_flag("--device-setting", s)?);
    }
    if let Some(s) = a.time_shift_s {
        cfg.time_shift_s = s;
    }
    let summary = pipeline::ingest_stage(&cfg, &a.out)?;
    print!("{}", summary.manifest);
    println!(
        "timeline: {} seconds, dominant {}, {} -> {}",
        summary.seconds,
        summary.dominant,
        summary.device_setting,
        a.out.display()
    );
    Ok(())
}

fn featurize(a: FeaturizeArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let base = cfg.as_ref().map(|c| c.window.clone()).unwrap_or_default();
    let peaks = cfg.as_ref().map(|c| c.peaks).unwrap_or_else(PeakConfig::default);
    let lengths = if a.window.is_empty() { vec![base.length.clone()] } else { a.window.clone() };
    let mut specs = Vec::new();
    for length in &lengths {
        let w = WindowConfig {
            length: length.clone(),
            allow_custom: base.allow_custom || a.allow_custom_window,
            min_valid_fraction: a.min_valid_fraction.unwrap_or(base.min_valid_fraction),
        };
        specs.push(w.spec().map_err(|e| Failure::flag("--window", e))?);
    }
    let targets: Vec<PathBuf> = match (&a.out, &a.out_dir) {
        (Some(out), None) if specs.len() == 1 => vec![out.clone()],
        (Some(_), None) => return Err(Failure::flag("--out", "takes a single --window; use --out-dir for several")),
        (None, Some(dir)) => specs.iter().map(|s| dir.join(format!("features_{}.csv", s.label()))).collect(),
        _ => return Err(Failure::flag("--out", "one of --out or --out-dir is required")),
    };
    for (spec, out) in specs.iter().zip(&targets) {
        let fm = pipeline::featurize_stage(&a.timeline, spec, &peaks, out)?;
        println!("{}: {} rows -> {}", spec.label(), fm.n_rows(), out.display());
    }
    Ok(())
}

fn filter(a: FilterArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let mut rules = cfg.as_ref().map(|c| c.filter.clone()).unwrap_or_else(ContextFilterRules::default);
    let nonempty = |v: Vec<String>| v.into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>();
    if let Some(w) = a.whitelist {
        rules.activity_whitelist = Some(nonempty(w));
    }
    if let Some(x) = a.exclude_activities {
        rules.excluded_activities = nonempty(x);
    }
    if let Some(r) = a.require_nonzero {
        rules.require_nonzero = nonempty(r);
    }
    let vocab = vocab_of(&cfg);
    rules.validate(&vocab).map_err(|e| Failure::flag("filter rules", e))?;
    let outcome = pipeline::filter_stage(&a.features, &rules, &vocab, &a.out)?;
    println!(
        "kept {} rows, dropped {} -> {}",
        outcome.matrix.n_rows(),
        outcome.dropped,
        a.out.display()
    );
    Ok(())
}

fn rank(a: RankArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let mut sel = cfg.as_ref().map(|c| c.selection.clone()).unwrap_or_else(SelectionConfig::default);
    if let Some(s) = &a.scheme {
        sel.scheme = parse_flag::<MrmrScheme>("--scheme", s)?;
    }
    if let Some(k) = a.top {
        sel.top_k = k;
    }
    if let Some(x) = a.exclude {
        sel.exclude = x.into_iter().filter(|s| !s.is_empty()).collect();
    }
    if let Some(b) = a.bins {
        sel.discretization.bins = b;
    }
    if let Some(s) = &a.strategy {
        sel.discretization.strategy = match s.as_str() {
            "quantile" => BinStrategy::Quantile,
            "equal_width" => BinStrategy::EqualWidth,
            other => return Err(Failure::flag("--strategy", format!("unknown strategy {other:?}"))),
        };
    }
    sel.validate().map_err(|e| Failure::flag("ranking options", e))?;
    let ranking = pipeline::rank_stage(&a.features, &sel, &a.out)?;
    let k = if sel.top_k == 0 { ranking.entries.len() } else { sel.top_k };
    if let Some(chart) = &a.chart {
        std::fs::write(chart, ranking.to_chart_tsv(k)).map_err(|e| Failure::io(chart, e))?;
    }
    for (i, e) in ranking.entries.iter().enumerate() {
        println!("{:>2} {}{:<22} {:.6}", i + 1, if i < k { '*' } else { ' ' }, e.name, e.score);
    }
    Ok(())
}

fn parse_param(p: &str) -> Result<(String, f64), Failure> {
    let (k, v) = p
        .split_once('=')
        .ok_or_else(|| Failure::flag("--param", format!("expected key=value, got {p:?}")))?;
    let v: f64 = v.trim().parse().map_err(|e| Failure::flag("--param", format!("{k}: {e}")))?;
    Ok((k.trim().to_string(), v))
}

fn train(a: TrainArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let mut spec = ModelSpec::new(parse_flag("--model", &a.model)?);
    if let Some(c) = &cfg {
        if let Some(m) = c.models.iter().find(|m| m.kind == spec.kind) {
            spec = m.clone();
        }
    }
    let params: BTreeMap<String, f64> = a.params.iter().map(|p| parse_param(p)).collect::<Result<_, _>>()?;
    spec.params.extend(params);
    if let Some(s) = a.model_seed {
        spec.seed = s;
    }
    spec.hyperparams().map_err(|e| Failure::flag("--param", e))?;
    let mut eval = cfg.as_ref().map(|c| c.eval).unwrap_or_else(EvalOptions::default);
    if let Some(k) = a.cv {
        if k < 2 {
            return Err(Failure::flag("--cv", "needs at least 2 folds"));
        }
        eval.folds = k;
    }
    if let Some(t) = a.test {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::flag("--test", format!("{t} outside (0, 1)")));
        }
        eval.test_fraction = t;
    }
    if let Some(m) = &a.split_mode {
        eval.split_mode = parse_flag::<SplitMode>("--split-mode", m)?;
    }
    if let Some(s) = a.seed {
        eval.seed = s;
    }
    let columns = match (&a.ranking, a.columns) {
        (Some(r), _) => Some(pipeline::read_selected(r)?),
        (None, Some(c)) => Some(c),
        (None, None) => None,
    };
    let report = pipeline::train_stage(&a.features, columns.as_deref(), &spec, &eval, &a.out)?;
    print!("{}", report.summary());
    Ok(())
}

fn report(a: ReportArgs) -> CmdResult {
    let text = pipeline::report_stage(&a.reports)?;
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn serve(a: ServeArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let addr: SocketAddr = parse_flag("--bind", &a.bind)?;
    if !addr.ip().is_loopback() && !a.allow_remote {
        return Err(Failure::flag("--bind", format!("{addr} is not a loopback address; pass --allow-remote to widen")));
    }
    let log = Arc::new(ContextLog::open(&a.log, vocab_of(&cfg))?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::flag("serve-survey", e))?;
    println!("serving {} on http://{addr}", a.log.display());
    rt.block_on(server::serve(log, addr))
        .map_err(|e| Failure::flag("--bind", format!("{addr}: {e}")))
}

fn run(a: RunArgs) -> CmdResult {
    let mut cfg = PipelineConfig::load_unchecked(&a.config)?;
    if a.allow_custom_window {
        cfg.window.allow_custom = true;
    }
    cfg.validate().map_err(|e| Failure::flag(&a.config.display().to_string(), e))?;
    let out = pipeline::run(&cfg)?;
    println!(
        "{} windows, {} after filter; selected {}",
        out.rows,
        out.filtered_rows,
        out.selected.join(", ")
    );
    for (r, p) in out.reports.iter().zip(&out.report_files) {
        println!(
            "{:<20} cv {:.4}  test {:.4}  -> {}",
            r.model.kind.to_string(),
            r.cv_accuracy,
            r.test_accuracy,
            p.display()
        );
    }
    println!("summary: {}", out.summary.display());
    Ok(())
}
