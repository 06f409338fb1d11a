//! Parsing of vendor-style JSON exports and the self-report context log.
//!
//! Export layout on disk:
//!
//! ```text
//! <root>/<hand>/<channel>/*.json
//! ```
//!
//! where `<hand>` is `left` or `right` and `<channel>` is one of
//! `heart_rate`, `steps`, `calories`, `altitude`. Every file holds a JSON
//! array of `{"dateTime": "MM/DD/YY HH:MM:SS", "value": ...}` records. Heart
//! rate carries `{"bpm": int, "confidence": int}`; count channels carry a
//! number or a numeric string.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{Channel, Hand, WearFlag};
use crate::error::{Error, Result};
use crate::vocab::{Vocabulary, AROUSAL_LEVELS};

pub const EXPORT_TIME_FORMAT: &str = "%m/%d/%y %H:%M:%S";
pub const CONTEXT_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const CONTEXT_HEADER: [&str; 5] = ["timestamp", "location", "activities", "arousal", "wear_flag"];

pub const HR_MIN_BPM: f64 = 25.0;
pub const HR_MAX_BPM: f64 = 250.0;
/// Fraction of malformed records above which a channel import fails.
pub const MALFORMED_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: NaiveDateTime,
    pub value: f64,
    /// Sensor confidence 0..=3, heart rate only.
    pub confidence: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSampleSeries {
    pub channel: Channel,
    pub hand: Hand,
    /// Strictly increasing in timestamp.
    pub samples: Vec<RawSample>,
}

impl RawSampleSeries {
    pub fn empty(channel: Channel, hand: Hand) -> Self {
        RawSampleSeries {
            channel,
            hand,
            samples: Vec::new(),
        }
    }

    pub fn span(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        Some((self.samples.first()?.timestamp, self.samples.last()?.timestamp))
    }

    /// Mean spacing between consecutive samples, in seconds.
    pub fn mean_gap_s(&self) -> Option<f64> {
        let (a, b) = self.span()?;
        if self.samples.len() < 2 {
            return None;
        }
        Some((b - a).num_seconds() as f64 / (self.samples.len() - 1) as f64)
    }
}

/// Record accounting for one channel import.
///
/// `accepted + malformed + out_of_range == total`; `duplicates` counts
/// accepted records superseded by a later record with the same timestamp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub files: usize,
    pub total: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub out_of_range: usize,
    pub duplicates: usize,
}

impl IngestStats {
    pub fn rejected(&self) -> usize {
        self.malformed + self.out_of_range
    }

    fn absorb(&mut self, other: &IngestStats) {
        self.files += other.files;
        self.total += other.total;
        self.accepted += other.accepted;
        self.malformed += other.malformed;
        self.out_of_range += other.out_of_range;
        self.duplicates += other.duplicates;
    }
}

#[derive(Debug, Clone)]
pub struct ChannelImport {
    pub series: RawSampleSeries,
    pub stats: IngestStats,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Added to every export timestamp, aligning device clocks with the context log.
    pub time_shift_s: i64,
}

enum RecordOutcome {
    Accepted(RawSample),
    Malformed,
    OutOfRange,
}

fn parse_export_time(v: Option<&Value>) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(v?.as_str()?, EXPORT_TIME_FORMAT).ok()
}

fn numeric(v: &Value) -> Option<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse::<f64>().ok()?,
        _ => return None,
    };
    x.is_finite().then_some(x)
}

fn parse_hr_record(record: &Value) -> RecordOutcome {
    let Some(timestamp) = parse_export_time(record.get("dateTime")) else {
        return RecordOutcome::Malformed;
    };
    let Some(value) = record.get("value") else {
        return RecordOutcome::Malformed;
    };
    let (Some(bpm), Some(confidence)) = (value.get("bpm").and_then(numeric), value.get("confidence").and_then(Value::as_u64)) else {
        return RecordOutcome::Malformed;
    };
    if confidence > 3 {
        return RecordOutcome::Malformed;
    }
    if !(HR_MIN_BPM..=HR_MAX_BPM).contains(&bpm) {
        return RecordOutcome::OutOfRange;
    }
    RecordOutcome::Accepted(RawSample {
        timestamp,
        value: bpm,
        confidence: Some(confidence as u8),
    })
}

fn parse_count_record(record: &Value) -> RecordOutcome {
    let Some(timestamp) = parse_export_time(record.get("dateTime")) else {
        return RecordOutcome::Malformed;
    };
    let Some(value) = record.get("value").and_then(numeric) else {
        return RecordOutcome::Malformed;
    };
    if value < 0.0 {
        return RecordOutcome::OutOfRange;
    }
    RecordOutcome::Accepted(RawSample {
        timestamp,
        value,
        confidence: None,
    })
}

fn parse_file(path: &Path, channel: Channel) -> Result<(Vec<RawSample>, IngestStats)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<Value> = serde_json::from_str(&text).map_err(|e| Error::parse(path, format!("not a JSON array of records: {e}")))?;
    let mut stats = IngestStats {
        files: 1,
        total: records.len(),
        ..IngestStats::default()
    };
    let mut samples = Vec::with_capacity(records.len());
    for record in &records {
        let outcome = match channel {
            Channel::HeartRate => parse_hr_record(record),
            _ => parse_count_record(record),
        };
        match outcome {
            RecordOutcome::Accepted(s) => {
                stats.accepted += 1;
                samples.push(s);
            }
            RecordOutcome::Malformed => stats.malformed += 1,
            RecordOutcome::OutOfRange => stats.out_of_range += 1,
        }
    }
    Ok((samples, stats))
}

fn import_channel(files: &[PathBuf], channel: Channel, hand: Hand, opts: IngestOptions) -> Result<ChannelImport> {
    if files.is_empty() {
        warn!("{hand} {channel}: no export files, series is empty");
        return Ok(ChannelImport {
            series: RawSampleSeries::empty(channel, hand),
            stats: IngestStats::default(),
        });
    }
    // Files are merged in path order so that "last record wins" does not
    // depend on the order the caller listed them or on parse scheduling.
    let mut ordered: Vec<&PathBuf> = files.iter().collect();
    ordered.sort();
    let parsed: Vec<(Vec<RawSample>, IngestStats)> = ordered
        .par_iter()
        .map(|p| parse_file(p, channel))
        .collect::<Result<_>>()?;

    let mut stats = IngestStats::default();
    let mut all = Vec::new();
    for (samples, s) in parsed {
        stats.absorb(&s);
        all.extend(samples);
    }
    if stats.total > 0 && stats.malformed as f64 > MALFORMED_LIMIT * stats.total as f64 {
        let path = if ordered.len() == 1 {
            ordered[0].clone()
        } else {
            ordered[0].parent().map(Path::to_path_buf).unwrap_or_default()
        };
        return Err(Error::TooManyMalformed {
            path,
            malformed: stats.malformed,
            total: stats.total,
        });
    }
    if stats.malformed > 0 || stats.out_of_range > 0 {
        warn!(
            "{hand} {channel}: rejected {} malformed and {} out-of-range records of {}",
            stats.malformed, stats.out_of_range, stats.total
        );
    }

    let shift = Duration::seconds(opts.time_shift_s);
    for s in &mut all {
        s.timestamp += shift;
    }
    // stable sort keeps input order among equal timestamps, so the last one wins
    all.sort_by_key(|s| s.timestamp);
    let mut samples: Vec<RawSample> = Vec::with_capacity(all.len());
    for s in all {
        match samples.last_mut() {
            Some(prev) if prev.timestamp == s.timestamp => {
                *prev = s;
                stats.duplicates += 1;
            }
            _ => samples.push(s),
        }
    }
    Ok(ChannelImport {
        series: RawSampleSeries { channel, hand, samples },
        stats,
    })
}

/// Parses heart-rate export files for one hand.
pub fn parse_hr_export(files: &[PathBuf], hand: Hand, opts: IngestOptions) -> Result<ChannelImport> {
    import_channel(files, Channel::HeartRate, hand, opts)
}

/// Parses steps, calories or altitude export files for one hand.
pub fn parse_count_export(files: &[PathBuf], channel: Channel, hand: Hand, opts: IngestOptions) -> Result<ChannelImport> {
    if channel == Channel::HeartRate {
        return Err(Error::Invalid("heart rate is not a count channel".into()));
    }
    import_channel(files, channel, hand, opts)
}

/// All channels of one hand.
#[derive(Debug, Clone)]
pub struct HandExport {
    pub hand: Hand,
    pub heart_rate: ChannelImport,
    pub steps: ChannelImport,
    pub calories: ChannelImport,
    pub altitude: ChannelImport,
}

impl HandExport {
    pub fn channels(&self) -> [&ChannelImport; 4] {
        [&self.heart_rate, &self.steps, &self.calories, &self.altitude]
    }
}

pub fn channel_dir(root: &Path, hand: Hand, channel: Channel) -> PathBuf {
    root.join(hand.as_str()).join(channel.as_str())
}

/// Lists the `.json` files of one channel directory; a missing directory yields none.
pub fn list_export_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_hand_export(root: &Path, hand: Hand, opts: IngestOptions) -> Result<HandExport> {
    let files = |c| list_export_files(&channel_dir(root, hand, c));
    Ok(HandExport {
        hand,
        heart_rate: parse_hr_export(&files(Channel::HeartRate)?, hand, opts)?,
        steps: parse_count_export(&files(Channel::Steps)?, Channel::Steps, hand, opts)?,
        calories: parse_count_export(&files(Channel::Calories)?, Channel::Calories, hand, opts)?,
        altitude: parse_count_export(&files(Channel::Altitude)?, Channel::Altitude, hand, opts)?,
    })
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Writes samples in the export format. Count channels use numeric strings
/// the way the vendor tool does.
pub fn write_export_file(path: &Path, channel: Channel, samples: &[RawSample]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 64);
    out.push('[');
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let ts = s.timestamp.format(EXPORT_TIME_FORMAT);
        match channel {
            Channel::HeartRate => {
                write!(
                    out,
                    "{{\"dateTime\":\"{ts}\",\"value\":{{\"bpm\":{},\"confidence\":{}}}}}",
                    format_value(s.value),
                    s.confidence.unwrap_or(0)
                )
                .unwrap();
            }
            _ => {
                write!(out, "{{\"dateTime\":\"{ts}\",\"value\":\"{}\"}}", format_value(s.value)).unwrap();
            }
        }
    }
    out.push_str("]\n");
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a series into `<root>/<hand>/<channel>/`, one file per calendar day.
pub fn write_series_by_day(root: &Path, series: &RawSampleSeries) -> Result<Vec<PathBuf>> {
    let dir = channel_dir(root, series.hand, series.channel);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths = Vec::new();
    let mut start = 0;
    while start < series.samples.len() {
        let day = series.samples[start].timestamp.date();
        let end = series.samples[start..]
            .iter()
            .position(|s| s.timestamp.date() != day)
            .map_or(series.samples.len(), |p| start + p);
        let path = dir.join(format!("{}-{}.json", series.channel, day.format("%Y-%m-%d")));
        write_export_file(&path, series.channel, &series.samples[start..end])?;
        paths.push(path);
        start = end;
    }
    Ok(paths)
}

/// Plain-text report of an import: per-channel counts, rejections and time span.
pub fn render_manifest(hands: &[&HandExport]) -> String {
    let mut out = String::from("# ingest manifest\n");
    for h in hands {
        for c in h.channels() {
            let s = &c.stats;
            let span = match c.series.span() {
                Some((a, b)) => format!("{} .. {}", a.format(CONTEXT_TIME_FORMAT), b.format(CONTEXT_TIME_FORMAT)),
                None => "empty".to_string(),
            };
            writeln!(
                out,
                "{} {}: files={} records={} samples={} malformed={} out_of_range={} duplicates={} span={}",
                h.hand,
                c.series.channel,
                s.files,
                s.total,
                c.series.samples.len(),
                s.malformed,
                s.out_of_range,
                s.duplicates,
                span
            )
            .unwrap();
        }
    }
    out
}

/// One self-report: where the subject is, what they are doing, and whether
/// the devices came off or went back on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextEntry {
    pub timestamp: NaiveDateTime,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub activities: Vec<String>,
    #[serde(default)]
    pub arousal: Option<u8>,
    #[serde(default)]
    pub wear_flag: WearFlag,
}

impl ContextEntry {
    pub fn new(timestamp: NaiveDateTime) -> Self {
        ContextEntry {
            timestamp,
            location: None,
            activities: Vec::new(),
            arousal: None,
            wear_flag: WearFlag::None,
        }
    }

    /// Number of survey options ticked; a wear flag counts as one.
    pub fn selection_count(&self) -> usize {
        usize::from(self.location.is_some())
            + self.activities.len()
            + usize::from(self.arousal.is_some())
            + usize::from(self.wear_flag != WearFlag::None)
    }

    pub fn primary_activity(&self) -> Option<&str> {
        self.activities.first().map(String::as_str)
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if let Some(loc) = &self.location {
            vocab.location_index(loc)?;
        }
        for (i, a) in self.activities.iter().enumerate() {
            vocab.activity_index(a)?;
            if self.activities[..i].contains(a) {
                return Err(Error::Invalid(format!("activity {a:?} listed twice")));
            }
        }
        if let Some(level) = self.arousal {
            if !AROUSAL_LEVELS.contains(&level) {
                return Err(Error::Invalid(format!("arousal {level} outside 1-5")));
            }
        }
        match self.selection_count() {
            0 => Err(Error::NoSelections),
            n if n > 4 => Err(Error::TooManySelections(n)),
            _ => Ok(()),
        }
    }

    /// True when both entries report the same selections.
    pub fn same_payload(&self, other: &ContextEntry) -> bool {
        self.location == other.location
            && self.activities == other.activities
            && self.arousal == other.arousal
            && self.wear_flag == other.wear_flag
    }

    pub fn to_record(&self) -> [String; 5] {
        [
            self.timestamp.format(CONTEXT_TIME_FORMAT).to_string(),
            self.location.clone().unwrap_or_default(),
            self.activities.join(";"),
            self.arousal.map(|a| a.to_string()).unwrap_or_default(),
            match self.wear_flag {
                WearFlag::None => String::new(),
                f => f.as_str().to_string(),
            },
        ]
    }

    pub fn from_record(fields: &[&str], vocab: &Vocabulary) -> Result<ContextEntry> {
        if fields.len() != CONTEXT_HEADER.len() {
            return Err(Error::Invalid(format!("expected {} fields, found {}", CONTEXT_HEADER.len(), fields.len())));
        }
        let ts = fields[0].trim();
        let timestamp = NaiveDateTime::parse_from_str(ts, CONTEXT_TIME_FORMAT)
            .map_err(|e| Error::Invalid(format!("unparseable timestamp {ts:?}: {e}")))?;
        let location = Some(fields[1].trim()).filter(|s| !s.is_empty()).map(str::to_string);
        let activities = fields[2]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let arousal = match fields[3].trim() {
            "" => None,
            s => Some(s.parse::<u8>().map_err(|_| Error::Invalid(format!("unparseable arousal {s:?}")))?),
        };
        let wear_flag = match fields[4].trim() {
            "" => WearFlag::None,
            s => s.parse()?,
        };
        let entry = ContextEntry {
            timestamp,
            location,
            activities,
            arousal,
            wear_flag,
        };
        entry.validate(vocab)?;
        Ok(entry)
    }
}

/// Reads the context log CSV, validating every row against the vocabulary.
/// Entries come back sorted by timestamp.
pub fn parse_context_log(path: &Path, vocab: &Vocabulary) -> Result<Vec<ContextEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_context_log_str(&text, vocab).map_err(|e| match e {
        Error::Invalid(message) => Error::parse(path, message),
        other => Error::parse(path, other.to_string()),
    })
}

pub fn parse_context_log_str(text: &str, vocab: &Vocabulary) -> Result<Vec<ContextEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Invalid(format!("header: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CONTEXT_HEADER {
        return Err(Error::Invalid(format!("expected header {:?}", CONTEXT_HEADER.join(","))));
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Invalid(format!("line {line}: {e}")))?;
        let fields: Vec<&str> = record.iter().collect();
        let entry = ContextEntry::from_record(&fields, vocab).map_err(|e| Error::Invalid(format!("line {line}: {e}")))?;
        entries.push(entry);
    }
    entries.sort_by_key(|e| e.timestamp);
    Ok(entries)
}

pub fn context_log_to_string(entries: &[ContextEntry]) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(CONTEXT_HEADER).unwrap();
    for e in entries {
        writer.write_record(e.to_record()).unwrap();
    }
    String::from_utf8(writer.into_inner().unwrap()).unwrap()
}

pub fn write_context_log(path: &Path, entries: &[ContextEntry]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(context_log_to_string(entries).as_bytes())
        .map_err(|e| Error::io(path, e))
}
