//! Uniform 1-second timeline: resampling, context alignment, wear masking and labels.
//!
//! Timeline file layout (CSV, one row per second). Three comment lines carry
//! the metadata, followed by this header:
//!
//! ```text
//! # dominant_hand=<left|right> device_setting=<setting>
//! # locations=<token;token;...>
//! # activities=<token;token;...>
//! timestamp,left_hr,left_hr_confidence,left_steps,left_calories,left_wear,
//! right_hr,right_hr_confidence,right_steps,right_calories,right_wear,
//! location,activity_primary,activities,time_of_day
//! ```
//!
//! `*_wear` is `1`/`0`, `activities` is `;`-separated, empty cells mean no
//! context has been reported yet.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, NaiveTime};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::{Channel, DeviceSetting, Hand, HandRole, TimeOfDay, WearFlag};
use crate::error::{Error, Result};
use crate::ingest::{ContextEntry, HandExport, RawSampleSeries, CONTEXT_TIME_FORMAT};
use crate::vocab::Vocabulary;

pub const TIMELINE_COLUMNS: [&str; 15] = [
    "timestamp",
    "left_hr",
    "left_hr_confidence",
    "left_steps",
    "left_calories",
    "left_wear",
    "right_hr",
    "right_hr_confidence",
    "right_steps",
    "right_calories",
    "right_wear",
    "location",
    "activity_primary",
    "activities",
    "time_of_day",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Linear between neighbouring samples, held constant past either end.
    LinearInterpolate,
    /// Each sample at its own second, zero elsewhere.
    ZeroFill,
}

impl FillPolicy {
    pub fn for_channel(channel: Channel) -> FillPolicy {
        match channel {
            Channel::HeartRate => FillPolicy::LinearInterpolate,
            _ => FillPolicy::ZeroFill,
        }
    }
}

/// Inclusive range of seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl Grid {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Result<Grid> {
        if end <= start {
            return Err(Error::Invalid(format!("grid end {end} not after start {start}")));
        }
        Ok(Grid { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_seconds() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offset(&self, t: NaiveDateTime) -> i64 {
        (t - self.start).num_seconds()
    }

    pub fn index(&self, t: NaiveDateTime) -> Option<usize> {
        let k = self.offset(t);
        (0..self.len() as i64).contains(&k).then_some(k as usize)
    }
}

pub fn resample_uniform(series: &RawSampleSeries, grid: Grid, policy: FillPolicy) -> Result<Vec<f64>> {
    let n = grid.len();
    let samples = &series.samples;
    match policy {
        FillPolicy::ZeroFill => {
            if samples.is_empty() {
                warn!("{} {}: empty series resampled to zeros", series.hand, series.channel);
            }
            let mut out = vec![0.0; n];
            for s in samples {
                if let Some(i) = grid.index(s.timestamp) {
                    out[i] = s.value;
                }
            }
            Ok(out)
        }
        FillPolicy::LinearInterpolate => {
            let (first, last) = match (samples.first(), samples.last()) {
                (Some(f), Some(l)) => (f, l),
                _ => return Err(Error::EmptyInterpolation),
            };
            let mut out = Vec::with_capacity(n);
            let mut next = 0usize;
            for k in 0..n as i64 {
                let t = grid.start + Duration::seconds(k);
                while next < samples.len() && samples[next].timestamp <= t {
                    next += 1;
                }
                // samples[next - 1] <= t < samples[next]
                let v = if next == 0 {
                    first.value
                } else if next == samples.len() {
                    last.value
                } else {
                    let a = &samples[next - 1];
                    let b = &samples[next];
                    let gap = (b.timestamp - a.timestamp).num_seconds() as f64;
                    let dt = (t - a.timestamp).num_seconds() as f64;
                    a.value + (b.value - a.value) * dt / gap
                };
                out.push(v);
            }
            Ok(out)
        }
    }
}

/// Per-second validity of an interpolated heart-rate trace: false where the
/// nearest samples on either side are more than `max_gap_s` apart, or where
/// the second lies more than `max_gap_s` beyond the first or last sample.
pub fn hr_gap_mask(series: &RawSampleSeries, grid: Grid, max_gap_s: i64) -> Vec<bool> {
    let n = grid.len();
    let samples = &series.samples;
    let mut mask = vec![false; n];
    if samples.is_empty() {
        return mask;
    }
    let clamp = |k: i64| k.clamp(0, n as i64) as usize;
    let first = grid.offset(samples[0].timestamp);
    let last = grid.offset(samples[samples.len() - 1].timestamp);
    for slot in &mut mask[clamp(first - max_gap_s)..clamp(first + 1)] {
        *slot = true;
    }
    for slot in &mut mask[clamp(last)..clamp(last + max_gap_s + 1)] {
        *slot = true;
    }
    for w in samples.windows(2) {
        let a = grid.offset(w[0].timestamp);
        let b = grid.offset(w[1].timestamp);
        if b - a <= max_gap_s {
            for slot in &mut mask[clamp(a)..clamp(b + 1)] {
                *slot = true;
            }
        }
    }
    mask
}

/// Start times of the four parts of the day. Evening wraps past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeOfDayBounds {
    pub morning: NaiveTime,
    pub noon: NaiveTime,
    pub afternoon: NaiveTime,
    pub evening: NaiveTime,
}

impl Default for TimeOfDayBounds {
    fn default() -> Self {
        let hm = |h| NaiveTime::from_hms_opt(h, 0, 0).unwrap();
        TimeOfDayBounds {
            morning: hm(6),
            noon: hm(12),
            afternoon: hm(14),
            evening: hm(18),
        }
    }
}

impl TimeOfDayBounds {
    pub fn validate(&self) -> Result<()> {
        if self.morning < self.noon && self.noon < self.afternoon && self.afternoon < self.evening {
            Ok(())
        } else {
            Err(Error::Config("time-of-day bounds must satisfy morning < noon < afternoon < evening".into()))
        }
    }

    pub fn classify(&self, t: NaiveTime) -> TimeOfDay {
        if t >= self.evening || t < self.morning {
            TimeOfDay::Evening
        } else if t >= self.afternoon {
            TimeOfDay::Afternoon
        } else if t >= self.noon {
            TimeOfDay::Noon
        } else {
            TimeOfDay::Morning
        }
    }
}

/// Part of the day under the default bounds: Morning [06,12), Noon [12,14),
/// Afternoon [14,18), Evening [18,06).
pub fn assign_time_of_day(timestamp: NaiveDateTime) -> TimeOfDay {
    TimeOfDayBounds::default().classify(timestamp.time())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimelineOptions {
    /// Longest heart-rate gap bridged by interpolation; longer gaps are masked.
    pub max_hr_gap_s: i64,
    /// One wear mask for both hands (true) or one per hand.
    pub shared_wear_mask: bool,
    pub time_of_day: TimeOfDayBounds,
}

impl Default for TimelineOptions {
    fn default() -> Self {
        TimelineOptions {
            max_hr_gap_s: 900,
            shared_wear_mask: true,
            time_of_day: TimeOfDayBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandChannels {
    pub hr: Vec<f64>,
    pub hr_confidence: Vec<u8>,
    pub steps: Vec<f64>,
    pub calories: Vec<f64>,
    pub wear_mask: Vec<bool>,
}

/// Input streams for one hand.
#[derive(Debug, Clone)]
pub struct HandSeries {
    pub hand: Hand,
    pub heart_rate: RawSampleSeries,
    pub steps: RawSampleSeries,
    pub calories: RawSampleSeries,
}

impl From<HandExport> for HandSeries {
    fn from(e: HandExport) -> Self {
        HandSeries {
            hand: e.hand,
            heart_rate: e.heart_rate.series,
            steps: e.steps.series,
            calories: e.calories.series,
        }
    }
}

impl HandSeries {
    fn coverage(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        [&self.heart_rate, &self.steps, &self.calories]
            .iter()
            .filter_map(|s| s.span())
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
}

/// Both hands on a shared 1-second grid with aligned context columns.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformTimeline {
    pub start: NaiveDateTime,
    /// Indexed by [`Hand::index`].
    pub hands: [HandChannels; 2],
    /// Index into `vocab.locations`.
    pub location: Vec<Option<u16>>,
    /// Index into `vocab.activities` of the first-listed activity.
    pub activity_primary: Vec<Option<u16>>,
    /// Bit `i` set when `vocab.activities[i]` was reported.
    pub activity_set: Vec<u32>,
    pub time_of_day: Vec<TimeOfDay>,
    pub vocab: Vocabulary,
    pub dominant: Hand,
    pub device_setting: DeviceSetting,
}

impl UniformTimeline {
    pub fn len(&self) -> usize {
        self.time_of_day.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hand(&self, hand: Hand) -> &HandChannels {
        &self.hands[hand.index()]
    }

    pub fn role(&self, hand: Hand) -> HandRole {
        if hand == self.dominant {
            HandRole::Dominant
        } else {
            HandRole::Nondominant
        }
    }

    pub fn time_at(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds(i as i64)
    }

    /// Seconds on which both devices count as worn.
    pub fn valid(&self, i: usize) -> bool {
        self.hands[0].wear_mask[i] && self.hands[1].wear_mask[i]
    }

    fn index_of(&self, t: NaiveDateTime) -> i64 {
        (t - self.start).num_seconds()
    }

    /// Clears the wear mask from every `removed` flag until the next `worn`
    /// flag, or to the end of the data when none follows.
    pub fn apply_wear_mask(mut self, entries: &[ContextEntry]) -> UniformTimeline {
        let n = self.len() as i64;
        let mut removed_at: Option<i64> = None;
        let mut intervals = Vec::new();
        for e in entries {
            let k = self.index_of(e.timestamp);
            match e.wear_flag {
                WearFlag::Removed => {
                    removed_at.get_or_insert(k);
                }
                WearFlag::Worn => match removed_at.take() {
                    Some(r) => intervals.push((r, k)),
                    None => warn!("worn flag at {} without a preceding removal; ignored", e.timestamp),
                },
                WearFlag::None => {}
            }
        }
        if let Some(r) = removed_at {
            intervals.push((r, n));
        }
        for (a, b) in intervals {
            let (a, b) = (a.clamp(0, n) as usize, b.clamp(0, n) as usize);
            for hand in &mut self.hands {
                for slot in &mut hand.wear_mask[a..b] {
                    *slot = false;
                }
            }
        }
        self
    }
}

/// Resamples both hands onto their common span, attaches forward-filled
/// context and time of day, masks long heart-rate gaps and removals, and
/// labels the hands.
pub fn build_labeled_timeline(
    left: &HandSeries,
    right: &HandSeries,
    entries: &[ContextEntry],
    dominant: Hand,
    device_setting: DeviceSetting,
    vocab: &Vocabulary,
    opts: &TimelineOptions,
) -> Result<UniformTimeline> {
    if left.hand != Hand::Left || right.hand != Hand::Right {
        return Err(Error::Invalid("hand series passed in the wrong order".into()));
    }
    opts.time_of_day.validate()?;
    let (Some(lc), Some(rc)) = (left.coverage(), right.coverage()) else {
        return Err(Error::NoOverlap);
    };
    let start = lc.0.max(rc.0);
    let end = lc.1.min(rc.1);
    if end <= start {
        return Err(Error::NoOverlap);
    }
    let grid = Grid::new(start, end)?;
    let n = grid.len();

    let mut hands = Vec::with_capacity(2);
    for h in [left, right] {
        let hr = resample_uniform(&h.heart_rate, grid, FillPolicy::LinearInterpolate)?;
        let hr_confidence = confidence_track(&h.heart_rate, grid);
        let steps = resample_uniform(&h.steps, grid, FillPolicy::ZeroFill)?;
        let calories = resample_uniform(&h.calories, grid, FillPolicy::ZeroFill)?;
        let wear_mask = hr_gap_mask(&h.heart_rate, grid, opts.max_hr_gap_s);
        hands.push(HandChannels {
            hr,
            hr_confidence,
            steps,
            calories,
            wear_mask,
        });
    }
    let mut hands: [HandChannels; 2] = hands.try_into().expect("two hands");
    if opts.shared_wear_mask {
        for i in 0..n {
            let both = hands[0].wear_mask[i] && hands[1].wear_mask[i];
            hands[0].wear_mask[i] = both;
            hands[1].wear_mask[i] = both;
        }
    }

    let mut location = vec![None; n];
    let mut activity_primary = vec![None; n];
    let mut activity_set = vec![0u32; n];
    let mut cur_loc: Option<u16> = None;
    let mut cur_act: Option<u16> = None;
    let mut cur_set = 0u32;
    let mut cursor = 0usize;
    let fill = |upto: usize, cursor: &mut usize, loc, act, set, l: &mut [Option<u16>], a: &mut [Option<u16>], s: &mut [u32]| {
        let upto = upto.min(n);
        if upto > *cursor {
            l[*cursor..upto].fill(loc);
            a[*cursor..upto].fill(act);
            s[*cursor..upto].fill(set);
            *cursor = upto;
        }
    };
    for e in entries {
        let k = grid.offset(e.timestamp).max(0) as usize;
        fill(k, &mut cursor, cur_loc, cur_act, cur_set, &mut location, &mut activity_primary, &mut activity_set);
        if let Some(loc) = &e.location {
            cur_loc = Some(vocab.location_index(loc)? as u16);
        }
        if !e.activities.is_empty() {
            cur_act = Some(vocab.activity_index(&e.activities[0])? as u16);
            cur_set = 0;
            for a in &e.activities {
                cur_set |= 1 << vocab.activity_index(a)?;
            }
        }
    }
    fill(n, &mut cursor, cur_loc, cur_act, cur_set, &mut location, &mut activity_primary, &mut activity_set);

    let time_of_day = (0..n)
        .map(|k| opts.time_of_day.classify((start + Duration::seconds(k as i64)).time()))
        .collect();

    let timeline = UniformTimeline {
        start,
        hands,
        location,
        activity_primary,
        activity_set,
        time_of_day,
        vocab: vocab.clone(),
        dominant,
        device_setting,
    };
    Ok(timeline.apply_wear_mask(entries))
}

fn confidence_track(series: &RawSampleSeries, grid: Grid) -> Vec<u8> {
    let n = grid.len();
    let mut out = vec![0u8; n];
    let samples = &series.samples;
    let Some(first) = samples.first() else {
        return out;
    };
    let mut cur = first.confidence.unwrap_or(0);
    let mut next = 0usize;
    for (k, slot) in out.iter_mut().enumerate() {
        let t = grid.start + Duration::seconds(k as i64);
        while next < samples.len() && samples[next].timestamp <= t {
            cur = samples[next].confidence.unwrap_or(0);
            next += 1;
        }
        *slot = cur;
    }
    out
}

fn activity_set_tokens(vocab: &Vocabulary, set: u32) -> String {
    let mut out = String::new();
    for (i, a) in vocab.activities.iter().enumerate() {
        if set & (1 << i) != 0 {
            if !out.is_empty() {
                out.push(';');
            }
            out.push_str(a);
        }
    }
    out
}

pub fn write_timeline(path: &Path, tl: &UniformTimeline) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut text = String::new();
    writeln!(text, "# dominant_hand={} device_setting={}", tl.dominant, tl.device_setting).unwrap();
    writeln!(text, "# locations={}", tl.vocab.locations.join(";")).unwrap();
    writeln!(text, "# activities={}", tl.vocab.activities.join(";")).unwrap();
    writeln!(text, "{}", TIMELINE_COLUMNS.join(",")).unwrap();
    let io = |e| Error::io(path, e);
    w.write_all(text.as_bytes()).map_err(io)?;
    let mut line = String::with_capacity(160);
    for i in 0..tl.len() {
        line.clear();
        write!(line, "{}", tl.time_at(i).format(CONTEXT_TIME_FORMAT)).unwrap();
        for h in &tl.hands {
            write!(
                line,
                ",{},{},{},{},{}",
                h.hr[i],
                h.hr_confidence[i],
                h.steps[i],
                h.calories[i],
                u8::from(h.wear_mask[i])
            )
            .unwrap();
        }
        let loc = tl.location[i].map_or("", |k| tl.vocab.locations[k as usize].as_str());
        let act = tl.activity_primary[i].map_or("", |k| tl.vocab.activities[k as usize].as_str());
        writeln!(
            line,
            ",{loc},{act},{},{}",
            activity_set_tokens(&tl.vocab, tl.activity_set[i]),
            tl.time_of_day[i]
        )
        .unwrap();
        w.write_all(line.as_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_timeline(path: &Path) -> Result<UniformTimeline> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let bad = |line: usize, msg: String| Error::parse(path, format!("line {line}: {msg}"));

    let mut lines = reader.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((_, Err(e))) => Err(Error::io(path, e)),
            None => Err(Error::parse(path, format!("truncated before {expect}"))),
        }
    };

    let (ln, meta) = next_line("metadata")?;
    let mut dominant = None;
    let mut device_setting = None;
    for kv in meta.trim_start_matches('#').split_whitespace() {
        match kv.split_once('=') {
            Some(("dominant_hand", v)) => dominant = Some(v.parse::<Hand>()?),
            Some(("device_setting", v)) => device_setting = Some(v.parse::<DeviceSetting>()?),
            _ => return Err(bad(ln, format!("unexpected metadata {kv:?}"))),
        }
    }
    let (Some(dominant), Some(device_setting)) = (dominant, device_setting) else {
        return Err(bad(ln, "missing dominant_hand or device_setting".into()));
    };
    let mut tokens = |key: &str| -> Result<Vec<String>> {
        let (ln, l) = next_line(key)?;
        let prefix = format!("# {key}=");
        let rest = l.strip_prefix(&prefix).ok_or_else(|| bad(ln, format!("expected {prefix}")))?;
        Ok(rest.split(';').map(str::to_string).collect())
    };
    let vocab = Vocabulary {
        locations: tokens("locations")?,
        activities: tokens("activities")?,
    };
    vocab.validate()?;
    let (ln, header) = next_line("header")?;
    if header != TIMELINE_COLUMNS.join(",") {
        return Err(bad(ln, "unexpected column header".into()));
    }

    let mut hands: [HandChannels; 2] = std::array::from_fn(|_| HandChannels {
        hr: Vec::new(),
        hr_confidence: Vec::new(),
        steps: Vec::new(),
        calories: Vec::new(),
        wear_mask: Vec::new(),
    });
    let mut location = Vec::new();
    let mut activity_primary = Vec::new();
    let mut activity_set = Vec::new();
    let mut time_of_day = Vec::new();
    let mut start = None;
    for (i, l) in lines {
        let ln = i + 1;
        let l = l.map_err(|e| Error::io(path, e))?;
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != TIMELINE_COLUMNS.len() {
            return Err(bad(ln, format!("expected {} fields, found {}", TIMELINE_COLUMNS.len(), f.len())));
        }
        let t = NaiveDateTime::parse_from_str(f[0], CONTEXT_TIME_FORMAT).map_err(|e| bad(ln, e.to_string()))?;
        let expected = start.map(|s: NaiveDateTime| s + Duration::seconds(location.len() as i64));
        match expected {
            None => start = Some(t),
            Some(e) if e != t => return Err(bad(ln, format!("timestamp {t} breaks the 1-second grid"))),
            _ => {}
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(ln, format!("{s:?}: {e}")));
        for (h, base) in hands.iter_mut().zip([1, 6]) {
            h.hr.push(num(f[base])?);
            h.hr_confidence.push(f[base + 1].parse().map_err(|_| bad(ln, "bad confidence".into()))?);
            h.steps.push(num(f[base + 2])?);
            h.calories.push(num(f[base + 3])?);
            h.wear_mask.push(match f[base + 4] {
                "1" => true,
                "0" => false,
                other => return Err(bad(ln, format!("bad wear flag {other:?}"))),
            });
        }
        let opt_idx = |s: &str, idx: &dyn Fn(&str) -> Result<usize>| -> Result<Option<u16>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(idx(s)? as u16))
            }
        };
        location.push(opt_idx(f[11], &|s| vocab.location_index(s))?);
        activity_primary.push(opt_idx(f[12], &|s| vocab.activity_index(s))?);
        let mut set = 0u32;
        for a in f[13].split(';').filter(|s| !s.is_empty()) {
            set |= 1 << vocab.activity_index(a)?;
        }
        activity_set.push(set);
        time_of_day.push(f[14].parse::<TimeOfDay>()?);
    }
    let start = start.ok_or_else(|| Error::parse(path, "timeline has no rows"))?;
    Ok(UniformTimeline {
        start,
        hands,
        location,
        activity_primary,
        activity_set,
        time_of_day,
        vocab,
        dominant,
        device_setting,
    })
}
