//! Pipeline configuration, read from TOML and validated before any stage runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{DeviceSetting, Hand};
use crate::error::{Error, Result};
use crate::features::{FeatureOptions, PeakParams, WindowSpec, FEATURE_NAMES};
use crate::models::{EvalOptions, ModelKind, ModelSpec};
use crate::selection::{ContextFilterRules, DiscretizationSpec, MrmrScheme};
use crate::synth::AsymmetryParams;
use crate::timeline::TimelineOptions;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// `"1m"`, `"10m"`, `"90s"`, or a bare number of minutes.
    pub length: String,
    pub allow_custom: bool,
    pub min_valid_fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            length: "1m".into(),
            allow_custom: false,
            min_valid_fraction: 0.5,
        }
    }
}

impl WindowConfig {
    pub fn spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(WindowSpec::parse_length(&self.length)?, self.min_valid_fraction, self.allow_custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakConfig {
    pub prominence: f64,
    pub min_separation: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        let p = PeakParams::<f64>::default();
        PeakConfig {
            prominence: p.prominence,
            min_separation: p.min_separation,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prominence.is_finite() && self.prominence >= 0.0) {
            return Err(Error::Config(format!("peak prominence {} must be finite and non-negative", self.prominence)));
        }
        if self.min_separation == 0 {
            return Err(Error::Config("peak min_separation must be at least 1 sample".into()));
        }
        Ok(())
    }

    pub fn feature_options(&self) -> FeatureOptions<f64> {
        FeatureOptions {
            peaks: PeakParams {
                prominence: self.prominence,
                min_separation: self.min_separation,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub scheme: MrmrScheme,
    /// Columns handed to the classifiers; 0 keeps every ranked feature.
    pub top_k: usize,
    /// Features removed before ranking, e.g. a channel known to leak the label.
    pub exclude: Vec<String>,
    pub discretization: DiscretizationSpec,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            scheme: MrmrScheme::Miq,
            top_k: 4,
            exclude: Vec::new(),
            discretization: DiscretizationSpec::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.discretization.validate()?;
        for name in &self.exclude {
            if !FEATURE_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!("selection.exclude names unknown feature {name:?}")));
            }
        }
        let remaining = FEATURE_NAMES.len() - self.exclude.len();
        if self.top_k > remaining {
            return Err(Error::Config(format!("selection.top_k = {} exceeds the {remaining} features left to rank", self.top_k)));
        }
        Ok(())
    }
}

/// When present, `run` first writes a synthetic dataset into the input directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub days: u32,
    pub seed: u64,
    pub dominant_hand: Hand,
    pub device_setting: DeviceSetting,
    pub asymmetry: AsymmetryParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 14,
            seed: 1,
            dominant_hand: Hand::Right,
            device_setting: DeviceSetting::ConfiguredPerHand,
            asymmetry: AsymmetryParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Export root holding `<hand>/<channel>/*.json` and the context log.
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `context_log.csv` inside `input_dir`.
    #[serde(default)]
    pub context_log: Option<PathBuf>,
    /// Taken from the input's ground-truth file when unset.
    #[serde(default)]
    pub dominant_hand: Option<Hand>,
    #[serde(default)]
    pub device_setting: Option<DeviceSetting>,
    /// Seconds added to every export timestamp.
    #[serde(default)]
    pub time_shift_s: i64,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub timeline: TimelineOptions,
    #[serde(default)]
    pub peaks: PeakConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub filter: ContextFilterRules,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub eval: EvalOptions,
    #[serde(default)]
    pub vocab: Vocabulary,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

fn default_models() -> Vec<ModelSpec> {
    ModelKind::ALL.iter().map(|&k| ModelSpec::new(k)).collect()
}

impl PipelineConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> PipelineConfig {
        PipelineConfig {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            context_log: None,
            dominant_hand: None,
            device_setting: None,
            time_shift_s: 0,
            window: WindowConfig::default(),
            timeline: TimelineOptions::default(),
            peaks: PeakConfig::default(),
            selection: SelectionConfig::default(),
            filter: ContextFilterRules::default(),
            models: default_models(),
            eval: EvalOptions::default(),
            vocab: Vocabulary::default(),
            synth: None,
        }
    }

    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let cfg = PipelineConfig::load_unchecked(path)?;
        cfg.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(cfg)
    }

    /// Parses without validating, so callers can apply overrides first.
    pub fn load_unchecked(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input_dir, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.context_log.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn context_log_path(&self) -> PathBuf {
        self.context_log
            .clone()
            .unwrap_or_else(|| self.input_dir.join(crate::synth::CONTEXT_LOG_FILE))
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        self.window.spec()?;
        self.timeline.time_of_day.validate()?;
        if self.timeline.max_hr_gap_s < 1 {
            return Err(Error::Config("timeline.max_hr_gap_s must be at least 1".into()));
        }
        self.peaks.validate()?;
        self.selection.validate()?;
        self.filter.validate(&self.vocab)?;
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        for m in &self.models {
            m.hyperparams()?;
        }
        if self.eval.folds < 2 {
            return Err(Error::Config(format!("eval.folds = {} must be at least 2", self.eval.folds)));
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            return Err(Error::Config(format!("eval.test_fraction = {} outside (0, 1)", self.eval.test_fraction)));
        }
        if let Some(s) = &self.synth {
            if s.days == 0 {
                return Err(Error::Config("synth.days must be at least 1".into()));
            }
            s.asymmetry.validate()?;
        }
        Ok(())
    }
}
