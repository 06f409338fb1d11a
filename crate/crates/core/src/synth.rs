//! Paired two-hand datasets with known dominant hand and tunable asymmetry.
//!
//! One simulated heart drives both wrists. Each device samples it on its own
//! irregular clock (gaps 4 to 10 s) with its own sensor noise. The dominant
//! wrist picks up extra oscillatory bursts and extra noise during active
//! segments, and the non-dominant wrist undercounts steps while the dominant
//! hand is busy with a tool. Rest and sleep are symmetric.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Channel, DeviceSetting, Hand, WearFlag};
use crate::error::{Error, Result};
use crate::ingest::{write_context_log, write_series_by_day, ContextEntry, RawSample, RawSampleSeries};
use crate::timeline::HandSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymmetryParams {
    /// Extra heart-rate bursts per minute on the dominant wrist while active.
    pub hr_peak_rate_boost: f64,
    /// Extra sensor noise std (bpm) on the dominant wrist while active.
    pub hr_noise_boost: f64,
    /// Multiplier on non-dominant steps during tool-use activities.
    pub step_undercount_factor: f64,
}

impl Default for AsymmetryParams {
    fn default() -> Self {
        AsymmetryParams {
            hr_peak_rate_boost: 0.5,
            hr_noise_boost: 1.0,
            step_undercount_factor: 0.9,
        }
    }
}

impl AsymmetryParams {
    /// No asymmetry: the hands differ only by independent sensor noise.
    pub fn none() -> Self {
        AsymmetryParams {
            hr_peak_rate_boost: 0.0,
            hr_noise_boost: 0.0,
            step_undercount_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.hr_peak_rate_boost.is_finite()
            && self.hr_peak_rate_boost >= 0.0
            && self.hr_noise_boost.is_finite()
            && self.hr_noise_boost >= 0.0
            && (0.0..=1.0).contains(&self.step_undercount_factor);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("asymmetry parameters out of range: {self:?}")))
        }
    }
}

/// Per-activity simulation constants.
#[derive(Debug, Clone, Copy)]
pub struct ActivityProfile {
    pub name: &'static str,
    pub hr_mean: f64,
    /// Std of the slow shared heart-rate fluctuation.
    pub hr_sd: f64,
    /// Shared heart-rate bursts per minute.
    pub burst_rate: f64,
    /// Probability that a minute contains steps.
    pub move_prob: f64,
    pub steps_per_min: f64,
    pub kcal_per_min: f64,
    /// Asymmetry applies during these activities.
    pub active: bool,
    /// The dominant hand handles a tool or utensil.
    pub tool_use: bool,
    pub arousal: u8,
}

const fn profile(
    name: &'static str,
    hr_mean: f64,
    hr_sd: f64,
    burst_rate: f64,
    move_prob: f64,
    steps_per_min: f64,
    kcal_per_min: f64,
    active: bool,
    tool_use: bool,
    arousal: u8,
) -> ActivityProfile {
    ActivityProfile {
        name,
        hr_mean,
        hr_sd,
        burst_rate,
        move_prob,
        steps_per_min,
        kcal_per_min,
        active,
        tool_use,
        arousal,
    }
}

pub const PROFILES: [ActivityProfile; 16] = [
    profile("sleeping", 55.0, 1.5, 0.02, 0.0, 0.0, 1.0, false, false, 1),
    profile("eating", 66.0, 2.0, 0.05, 0.3, 6.0, 1.6, true, true, 2),
    profile("cooking", 76.0, 2.5, 0.08, 0.7, 20.0, 2.5, true, true, 3),
    profile("dishwashing", 74.0, 2.5, 0.08, 0.6, 12.0, 2.3, true, true, 2),
    profile("chores", 84.0, 3.0, 0.1, 0.8, 35.0, 3.3, true, true, 3),
    profile("writing", 62.0, 2.0, 0.05, 0.15, 5.0, 1.5, true, true, 3),
    profile("working", 62.0, 2.0, 0.05, 0.25, 12.0, 1.5, false, false, 3),
    profile("meeting", 63.0, 2.0, 0.05, 0.1, 5.0, 1.4, false, false, 3),
    profile("movies", 60.0, 1.5, 0.03, 0.05, 5.0, 1.3, false, false, 2),
    profile("exercising", 130.0, 2.0, 0.1, 0.97, 140.0, 9.0, true, false, 5),
    profile("walking", 90.0, 2.5, 0.08, 0.95, 105.0, 4.5, true, false, 3),
    profile("commuting", 72.0, 2.0, 0.05, 0.4, 30.0, 1.8, false, false, 2),
    profile("shopping", 82.0, 2.5, 0.08, 0.85, 50.0, 3.0, true, false, 3),
    profile("socializing", 70.0, 2.0, 0.05, 0.3, 10.0, 1.6, false, false, 4),
    profile("hygiene", 72.0, 2.0, 0.05, 0.0, 0.0, 2.0, false, false, 2),
    profile("other", 68.0, 2.0, 0.05, 0.4, 15.0, 1.8, false, false, 3),
];

pub fn activity_profile(name: &str) -> Option<&'static ActivityProfile> {
    PROFILES.iter().find(|p| p.name == name)
}

/// Activity during which both devices are taken off.
pub const REMOVAL_ACTIVITY: &str = "hygiene";

/// Per-device heart-rate sensor noise std (bpm).
pub const HR_SENSOR_NOISE: f64 = 1.0;

const BURST_AMPLITUDE: (f64, f64) = (8.0, 12.0);
const BURST_WIDTH_S: (u32, u32) = (18, 26);
const HR_SAMPLE_GAP_S: (i64, i64) = (4, 10);
const HR_LEVEL_TAU_S: f64 = 60.0;
const HR_AR_TAU_S: f64 = 30.0;
const TARGET_STEP_GAP_MIN: f64 = 2.0;

/// First simulated day.
pub fn synth_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2022, 11, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: NaiveDateTime,
    pub duration_s: u32,
    pub activity: String,
    pub location: String,
}

impl Segment {
    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::seconds(i64::from(self.duration_s))
    }
}

/// Contiguous segments starting at [`synth_epoch`], whole minutes long.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySchedule {
    pub days: u32,
    pub seed: u64,
    pub segments: Vec<Segment>,
}

impl ActivitySchedule {
    pub fn start(&self) -> NaiveDateTime {
        synth_epoch()
    }

    pub fn total_seconds(&self) -> u64 {
        self.segments.iter().map(|s| u64::from(s.duration_s)).sum()
    }
}

struct DayBuilder<'a> {
    rng: &'a mut ChaCha8Rng,
    day_start: NaiveDateTime,
    /// Minutes since midnight.
    now: u32,
    out: Vec<Segment>,
}

impl DayBuilder<'_> {
    fn minutes(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.random_range(lo..=hi)
    }

    fn push(&mut self, activity: &str, location: &str, minutes: u32) {
        if minutes == 0 {
            return;
        }
        match self.out.last_mut() {
            Some(last) if last.activity == activity && last.location == location => last.duration_s += minutes * 60,
            _ => self.out.push(Segment {
                start: self.day_start + Duration::minutes(i64::from(self.now)),
                duration_s: minutes * 60,
                activity: activity.to_string(),
                location: location.to_string(),
            }),
        }
        self.now += minutes;
    }

    fn span(&mut self, activity: &str, location: &str, lo: u32, hi: u32) {
        let m = self.minutes(lo, hi);
        self.push(activity, location, m);
    }

    /// Fills until `until` (minutes since midnight) with picks from `choices`.
    fn fill(&mut self, until: u32, choices: &[(&str, &str, u32, u32, f64)]) {
        while self.now < until {
            let total: f64 = choices.iter().map(|c| c.4).sum();
            let mut pick = self.rng.random_range(0.0..total);
            let mut chosen = choices[0];
            for c in choices {
                if pick < c.4 {
                    chosen = *c;
                    break;
                }
                pick -= c.4;
            }
            let m = self.minutes(chosen.2, chosen.3).min(until - self.now);
            self.push(chosen.0, chosen.1, m);
        }
    }
}

/// Diurnal schedule: a night of sleep, meals, work or weekend errands, one
/// exercise block every day, and evening leisure.
pub fn generate_schedule(days: u32, seed: u64) -> Result<ActivitySchedule> {
    if days == 0 {
        return Err(Error::Config("schedule needs at least one day".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments: Vec<Segment> = Vec::new();
    for d in 0..days {
        let mut b = DayBuilder {
            rng: &mut rng,
            day_start: synth_epoch() + Duration::days(i64::from(d)),
            now: 0,
            out: Vec::new(),
        };
        let weekend = d % 7 >= 5;
        let wake = 6 * 60 + 30 + b.minutes(0, 60) + if weekend { 60 } else { 0 };
        let bedtime = 22 * 60 + 30 + b.minutes(0, 60);
        b.push("sleeping", "home", wake);
        b.span("hygiene", "home", 15, 25);
        b.span("cooking", "home", 10, 20);
        b.span("eating", "home", 15, 25);
        b.span("dishwashing", "home", 5, 10);
        if weekend {
            b.span("chores", "home", 30, 60);
            b.span("walking", "outdoors", 20, 40);
            b.span("shopping", "store", 30, 60);
            b.span("eating", "restaurant", 30, 45);
            let place = if b.rng.random_bool(0.5) { "gym" } else { "outdoors" };
            b.span("exercising", place, 45, 90);
            b.span("socializing", "friend_home", 60, 180);
        } else {
            b.span("commuting", "transit", 20, 40);
            let lunch = 12 * 60 + b.minutes(0, 30);
            let work = [
                ("working", "office", 45, 120, 0.5),
                ("meeting", "office", 30, 60, 0.25),
                ("writing", "office", 20, 60, 0.25),
            ];
            b.fill(lunch, &work);
            b.span("walking", "outdoors", 10, 15);
            b.span("eating", "restaurant", 30, 45);
            b.span("walking", "outdoors", 10, 15);
            let leave = 16 * 60 + 30 + b.minutes(0, 60);
            b.fill(leave, &work);
            b.span("commuting", "transit", 20, 40);
            b.span("exercising", "gym", 40, 70);
            if b.rng.random_bool(0.4) {
                b.span("shopping", "store", 20, 40);
            }
        }
        b.span("cooking", "home", 20, 40);
        b.span("eating", "home", 20, 30);
        b.span("dishwashing", "home", 10, 20);
        if b.rng.random_bool(0.6) {
            b.span("chores", "home", 15, 30);
        }
        let leisure = [
            ("movies", "home", 45, 120, 0.35),
            ("socializing", "home", 30, 90, 0.2),
            ("writing", "home", 20, 60, 0.2),
            ("other", "home", 20, 60, 0.25),
        ];
        b.fill(bedtime, &leisure);
        let rest = (24 * 60u32).saturating_sub(b.now);
        b.push("sleeping", "home", rest);
        debug_assert_eq!(b.now, 24 * 60, "day over-filled");
        for s in b.out {
            match segments.last_mut() {
                Some(last) if last.activity == s.activity && last.location == s.location => last.duration_s += s.duration_s,
                _ => segments.push(s),
            }
        }
    }
    Ok(ActivitySchedule { days, seed, segments })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub dominant: Hand,
    pub device_setting: DeviceSetting,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            dominant: Hand::Right,
            device_setting: DeviceSetting::ConfiguredPerHand,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub left: HandSeries,
    pub right: HandSeries,
    pub altitude: [RawSampleSeries; 2],
    pub context: Vec<ContextEntry>,
    pub dominant: Hand,
    pub device_setting: DeviceSetting,
    pub params: AsymmetryParams,
    pub seed: u64,
    pub days: u32,
}

impl SyntheticDataset {
    pub fn hand(&self, hand: Hand) -> &HandSeries {
        match hand {
            Hand::Left => &self.left,
            Hand::Right => &self.right,
        }
    }

    pub fn ground_truth(&self) -> String {
        let mut out = String::new();
        writeln!(out, "dominant_hand={}", self.dominant).unwrap();
        writeln!(out, "device_setting={}", self.device_setting).unwrap();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "days={}", self.days).unwrap();
        writeln!(out, "hr_peak_rate_boost={}", self.params.hr_peak_rate_boost).unwrap();
        writeln!(out, "hr_noise_boost={}", self.params.hr_noise_boost).unwrap();
        writeln!(out, "step_undercount_factor={}", self.params.step_undercount_factor).unwrap();
        out
    }

    /// Writes `<dir>/<hand>/<channel>/*.json`, `context_log.csv` and
    /// `ground_truth.txt`. Returns every path written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (h, alt) in [&self.left, &self.right].into_iter().zip(&self.altitude) {
            for s in [&h.heart_rate, &h.steps, &h.calories, alt] {
                written.extend(write_series_by_day(dir, s)?);
            }
        }
        let log = dir.join(CONTEXT_LOG_FILE);
        write_context_log(&log, &self.context)?;
        written.push(log);
        let gt = dir.join(GROUND_TRUTH_FILE);
        fs::write(&gt, self.ground_truth()).map_err(|e| Error::io(&gt, e))?;
        written.push(gt);
        Ok(written)
    }
}

pub const CONTEXT_LOG_FILE: &str = "context_log.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";

/// Reads `dominant_hand` and `device_setting` back from a ground-truth file.
pub fn read_ground_truth(path: &Path) -> Result<(Hand, DeviceSetting)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut hand = None;
    let mut setting = None;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "dominant_hand" => hand = Some(v.parse()?),
                "device_setting" => setting = Some(v.parse()?),
                _ => {}
            }
        }
    }
    match (hand, setting) {
        (Some(h), Some(s)) => Ok((h, s)),
        _ => Err(Error::parse(path, "missing dominant_hand or device_setting")),
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds raised-cosine bursts arriving at `rate_per_min` (per second
/// Bernoulli) wherever `rate_per_min` is positive.
fn add_bursts(signal: &mut [f64], rate_per_min: impl Fn(usize) -> f64, rng: &mut ChaCha8Rng) {
    let n = signal.len();
    for k in 0..n {
        let rate = rate_per_min(k);
        if rate > 0.0 && rng.random_bool((rate / 60.0).min(1.0)) {
            let amp = rng.random_range(BURST_AMPLITUDE.0..BURST_AMPLITUDE.1);
            let width = rng.random_range(BURST_WIDTH_S.0..=BURST_WIDTH_S.1) as usize;
            for j in 0..width.min(n - k) {
                let u = j as f64 / width as f64;
                signal[k + j] += amp * (std::f64::consts::PI * u).sin().powi(2);
            }
        }
    }
}

fn confidence(rng: &mut ChaCha8Rng) -> u8 {
    match rng.random_range(0..100) {
        0..=1 => 0,
        2..=9 => 1,
        10..=39 => 2,
        _ => 3,
    }
}

fn location_altitude(location: &str) -> f64 {
    match location {
        "office" | "campus" => 138.0,
        "gym" => 121.0,
        "store" | "restaurant" => 127.0,
        "transit" => 110.0,
        "outdoors" => 132.0,
        _ => 118.0,
    }
}

/// Simulates both wrists over the schedule. Output is a pure function of
/// the inputs.
pub fn synthesize_paired_dataset(schedule: &ActivitySchedule, params: &AsymmetryParams, seed: u64, opts: &SynthOptions) -> Result<SyntheticDataset> {
    params.validate()?;
    let t0 = schedule.start();
    let n = schedule.total_seconds() as usize;
    if n < 120 {
        return Err(Error::Config("schedule shorter than two minutes".into()));
    }
    let mut seg_of = Vec::with_capacity(n);
    let mut profiles = Vec::with_capacity(schedule.segments.len());
    for (i, s) in schedule.segments.iter().enumerate() {
        let p = activity_profile(&s.activity).ok_or_else(|| Error::UnknownToken {
            kind: "activity",
            token: s.activity.clone(),
        })?;
        profiles.push(p);
        seg_of.extend(std::iter::repeat_n(i as u32, s.duration_s as usize));
    }
    let prof = |k: usize| profiles[seg_of[k] as usize];
    let worn = |k: usize| prof(k).name != REMOVAL_ACTIVITY;

    // shared heart: lagged activity level + AR(1) fluctuation + bursts
    let mut heart_rng = rng_stream(seed, 1);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let phi = (-1.0 / HR_AR_TAU_S).exp();
    let innov = (1.0 - phi * phi).sqrt();
    let mut heart = vec![0.0; n];
    let mut level = prof(0).hr_mean;
    let mut ar = 0.0;
    for (k, h) in heart.iter_mut().enumerate() {
        let p = prof(k);
        level += (p.hr_mean - level) / HR_LEVEL_TAU_S;
        ar = phi * ar + innov * p.hr_sd * std_normal.sample(&mut heart_rng);
        *h = level + ar;
    }
    add_bursts(&mut heart, |k| prof(k).burst_rate, &mut heart_rng);

    // dominant-wrist artifacts during active segments
    let mut artifact_rng = rng_stream(seed, 6);
    let mut artifact = vec![0.0; n];
    add_bursts(&mut artifact, |k| if prof(k).active { params.hr_peak_rate_boost } else { 0.0 }, &mut artifact_rng);

    // steps shared by the body, per minute
    let minutes = n / 60;
    let mut body_rng = rng_stream(seed, 4);
    let body_steps: Vec<f64> = (0..minutes)
        .map(|m| {
            let p = prof(m * 60);
            if p.move_prob > 0.0 && body_rng.random_bool(p.move_prob) {
                p.steps_per_min * body_rng.random_range(0.7..1.3)
            } else {
                0.0
            }
        })
        .collect();
    let moving = body_steps.iter().filter(|&&s| s > 0.0).count() as f64 / minutes as f64;
    let zero_emit = ((1.0 / TARGET_STEP_GAP_MIN - moving) / (1.0 - moving)).clamp(0.0, 1.0);

    let mut hands = Vec::with_capacity(2);
    let mut altitude = Vec::with_capacity(2);
    for hand in Hand::ALL {
        let hand = *hand;
        let dominant = hand == opts.dominant;
        let mut rng = rng_stream(seed, 2 + hand.index() as u64);
        let mut extra_rng = rng_stream(seed, 8 + hand.index() as u64);
        let mut count_rng = rng_stream(seed, 10 + hand.index() as u64);

        let mut hr = Vec::with_capacity(n / 6);
        let mut k = 0usize;
        while k < n {
            if !worn(k) {
                k += 1;
                continue;
            }
            let mut v = heart[k] + HR_SENSOR_NOISE * std_normal.sample(&mut rng);
            if dominant && prof(k).active {
                v += artifact[k];
                if params.hr_noise_boost > 0.0 {
                    v += params.hr_noise_boost * std_normal.sample(&mut extra_rng);
                }
            }
            hr.push(RawSample {
                timestamp: t0 + Duration::seconds(k as i64),
                value: v.round().clamp(30.0, 220.0),
                confidence: Some(confidence(&mut rng)),
            });
            let gap = rng.random_range(HR_SAMPLE_GAP_S.0..=HR_SAMPLE_GAP_S.1) as usize;
            k = if k + gap >= n && k < n - 1 { n - 1 } else { k + gap };
        }

        let mut steps = Vec::new();
        let mut calories = Vec::new();
        let mut alt = Vec::new();
        for m in 0..minutes {
            let k = m * 60;
            if !worn(k) {
                continue;
            }
            let p = prof(k);
            let ts = t0 + Duration::seconds(k as i64);
            let mut s = body_steps[m];
            if !dominant && p.tool_use {
                s *= params.step_undercount_factor;
            }
            let s = (s * (1.0 + 0.05 * std_normal.sample(&mut count_rng))).round().max(0.0);
            if s > 0.0 || m == 0 || count_rng.random_bool(zero_emit) {
                steps.push(RawSample {
                    timestamp: ts,
                    value: s,
                    confidence: None,
                });
            }
            let kcal = (p.kcal_per_min * (1.0 + 0.05 * std_normal.sample(&mut count_rng))).max(0.01);
            calories.push(RawSample {
                timestamp: ts,
                value: (kcal * 100.0).round() / 100.0,
                confidence: None,
            });
            if m % 15 == 0 {
                let seg = &schedule.segments[seg_of[k] as usize];
                let a = location_altitude(&seg.location) + 0.5 * std_normal.sample(&mut count_rng);
                alt.push(RawSample {
                    timestamp: ts,
                    value: (a * 10.0).round() / 10.0,
                    confidence: None,
                });
            }
        }
        let series = |channel, samples| RawSampleSeries { channel, hand, samples };
        hands.push(HandSeries {
            hand,
            heart_rate: series(Channel::HeartRate, hr),
            steps: series(Channel::Steps, steps),
            calories: series(Channel::Calories, calories),
        });
        altitude.push(series(Channel::Altitude, alt));
    }

    let mut context_rng = rng_stream(seed, 5);
    let mut context = Vec::with_capacity(schedule.segments.len());
    let mut was_removed = false;
    for s in &schedule.segments {
        let p = activity_profile(&s.activity).expect("checked above");
        let mut e = ContextEntry::new(s.start);
        e.location = Some(s.location.clone());
        e.activities = vec![s.activity.clone()];
        let jitter: i16 = context_rng.random_range(-1..=1);
        e.arousal = Some((i16::from(p.arousal) + jitter).clamp(1, 5) as u8);
        if s.activity == REMOVAL_ACTIVITY {
            e.wear_flag = WearFlag::Removed;
            was_removed = true;
        } else if was_removed {
            e.wear_flag = WearFlag::Worn;
            was_removed = false;
        }
        context.push(e);
    }

    let right = hands.pop().expect("two hands");
    let left = hands.pop().expect("two hands");
    let right_alt = altitude.pop().expect("two hands");
    let left_alt = altitude.pop().expect("two hands");
    Ok(SyntheticDataset {
        left,
        right,
        altitude: [left_alt, right_alt],
        context,
        dominant: opts.dominant,
        device_setting: opts.device_setting,
        params: *params,
        seed,
        days: schedule.days,
    })
}
