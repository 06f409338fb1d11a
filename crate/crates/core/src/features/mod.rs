//! Tumbling windows over the timeline and the 25-feature vector per (window, hand).

pub mod peaks;
pub mod spectral;
pub mod stats;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Hand, TimeOfDay};
use crate::error::{Error, Result};
use crate::matrix::{Column, FeatureMatrix, RowMeta};
use crate::scalar::Scalar;
use crate::timeline::UniformTimeline;

pub use peaks::{count_peaks, PeakParams};
pub use spectral::MIN_SPECTRAL_LEN;

pub const HR_TIME_FEATURES: [&str; 17] = [
    "hr_mean",
    "hr_median",
    "hr_std",
    "hr_var",
    "hr_min",
    "hr_max",
    "hr_range",
    "hr_rms",
    "hr_iqr",
    "hr_p25",
    "hr_p75",
    "hr_mad",
    "hr_skewness",
    "hr_kurtosis",
    "hr_slope",
    "hr_mean_abs_diff",
    "hr_peak_count",
];

pub const HR_FREQ_FEATURES: [&str; 3] = ["hr_dominant_freq", "hr_total_power", "hr_spectral_entropy"];

/// Every feature column, in file order.
pub const FEATURE_NAMES: [&str; 25] = [
    "hr_mean",
    "hr_median",
    "hr_std",
    "hr_var",
    "hr_min",
    "hr_max",
    "hr_range",
    "hr_rms",
    "hr_iqr",
    "hr_p25",
    "hr_p75",
    "hr_mad",
    "hr_skewness",
    "hr_kurtosis",
    "hr_slope",
    "hr_mean_abs_diff",
    "hr_peak_count",
    "hr_dominant_freq",
    "hr_total_power",
    "hr_spectral_entropy",
    "steps_cumsum",
    "calories_cumsum",
    "location",
    "activity",
    "time_of_day",
];

/// Window lengths, in minutes, accepted without `allow_custom`.
pub const STANDARD_WINDOW_MINUTES: [u32; 5] = [1, 5, 10, 20, 40];

/// Token for a context column before the first self-report.
pub const UNKNOWN_CONTEXT: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length_s: u32,
    /// Share of worn seconds a window needs to be emitted.
    pub min_valid_fraction: f64,
}

impl WindowSpec {
    pub fn new(length_s: u32, min_valid_fraction: f64, allow_custom: bool) -> Result<WindowSpec> {
        let standard = length_s.is_multiple_of(60) && STANDARD_WINDOW_MINUTES.contains(&(length_s / 60));
        if !standard && !allow_custom {
            return Err(Error::Config(format!(
                "window length {length_s}s is not one of {STANDARD_WINDOW_MINUTES:?} minutes (allow custom windows to override)"
            )));
        }
        if length_s == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        if !(min_valid_fraction > 0.0 && min_valid_fraction <= 1.0) {
            return Err(Error::Config(format!("min_valid_fraction {min_valid_fraction} outside (0, 1]")));
        }
        Ok(WindowSpec {
            length_s,
            min_valid_fraction,
        })
    }

    pub fn minutes(minutes: u32) -> Result<WindowSpec> {
        WindowSpec::new(minutes * 60, 0.5, false)
    }

    /// `"10m"`, `"90s"` or a bare number of minutes.
    pub fn parse_length(text: &str) -> Result<u32> {
        let t = text.trim();
        let bad = || Error::Config(format!("bad window length {text:?}"));
        let (num, mult) = if let Some(m) = t.strip_suffix('m') {
            (m, 60)
        } else if let Some(s) = t.strip_suffix('s') {
            (s, 1)
        } else {
            (t, 60)
        };
        num.parse::<u32>().map(|v| v * mult).map_err(|_| bad())
    }

    /// Short label used in file names, e.g. `10m` or `90s`.
    pub fn label(&self) -> String {
        if self.length_s.is_multiple_of(60) {
            format!("{}m", self.length_s / 60)
        } else {
            format!("{}s", self.length_s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    /// Position of the window on the tumbling grid anchored at the timeline start.
    pub id: usize,
    pub range: Range<usize>,
}

/// Tumbling windows with enough worn seconds; the trailing partial window is dropped.
pub fn partition_windows(timeline: &UniformTimeline, spec: &WindowSpec) -> Vec<Window> {
    let len = spec.length_s as usize;
    let slots = timeline.len() / len;
    let need = (spec.min_valid_fraction * len as f64).ceil() as usize;
    (0..slots)
        .filter_map(|id| {
            let range = id * len..(id + 1) * len;
            let valid = range.clone().filter(|&i| timeline.valid(i)).count();
            (valid >= need).then_some(Window { id, range })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions<T> {
    pub peaks: PeakParams<T>,
}

impl<T: Scalar> Default for FeatureOptions<T> {
    fn default() -> Self {
        FeatureOptions {
            peaks: PeakParams::default(),
        }
    }
}

/// The 17 time-domain heart-rate features.
pub fn extract_hr_time_features<T: Scalar>(hr: &[T], peaks: &PeakParams<T>) -> Result<[T; 17]> {
    if hr.len() < 2 {
        return Err(Error::Invalid(format!("{} heart-rate samples, need at least 2", hr.len())));
    }
    Ok(stats::time_features(hr, peaks))
}

/// Dominant frequency, total power and spectral entropy of a 1 Hz trace.
pub fn extract_hr_freq_features<T: Scalar>(hr: &[T]) -> Result<[T; 3]> {
    if hr.len() < MIN_SPECTRAL_LEN {
        return Err(Error::Invalid(format!(
            "{} heart-rate samples, need at least {MIN_SPECTRAL_LEN}",
            hr.len()
        )));
    }
    Ok(spectral::spectral_features(hr))
}

/// Cumulative sum of a count channel over the window.
pub fn extract_count_features<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum()
}

/// Most frequent value, ties going to the one seen first.
fn mode<K: Copy + PartialEq>(values: impl Iterator<Item = K>) -> Option<K> {
    let mut counts: Vec<(K, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(k, _)| *k == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let mut best: Option<(K, usize)> = None;
    for (k, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((k, c));
        }
    }
    best.map(|(k, _)| k)
}

struct WindowRows<T> {
    window: Window,
    numeric: [[T; 22]; 2],
    location: String,
    activity: String,
    time_of_day: TimeOfDay,
}

fn window_rows<T: Scalar>(tl: &UniformTimeline, window: Window, opts: &FeatureOptions<T>) -> Option<WindowRows<T>> {
    let valid: Vec<usize> = window.range.clone().filter(|&i| tl.valid(i)).collect();
    if valid.len() < MIN_SPECTRAL_LEN {
        return None;
    }
    let mut numeric = [[T::zero(); 22]; 2];
    for hand in Hand::ALL {
        let ch = tl.hand(*hand);
        let hr: Vec<T> = valid.iter().map(|&i| T::of(ch.hr[i])).collect();
        let steps: Vec<T> = valid.iter().map(|&i| T::of(ch.steps[i])).collect();
        let calories: Vec<T> = valid.iter().map(|&i| T::of(ch.calories[i])).collect();
        let row = &mut numeric[hand.index()];
        row[..17].copy_from_slice(&stats::time_features(&hr, &opts.peaks));
        row[17..20].copy_from_slice(&spectral::spectral_features(&hr));
        row[20] = extract_count_features(&steps);
        row[21] = extract_count_features(&calories);
    }
    let location = mode(valid.iter().map(|&i| tl.location[i]))
        .flatten()
        .map_or(UNKNOWN_CONTEXT.to_string(), |k| tl.vocab.locations[k as usize].clone());
    let activity = mode(valid.iter().map(|&i| tl.activity_primary[i]))
        .flatten()
        .map_or(UNKNOWN_CONTEXT.to_string(), |k| tl.vocab.activities[k as usize].clone());
    let time_of_day = mode(valid.iter().map(|&i| tl.time_of_day[i])).expect("non-empty window");
    Some(WindowRows {
        window,
        numeric,
        location,
        activity,
        time_of_day,
    })
}

/// Two rows per emitted window (left then right), sharing the window's
/// context columns and carrying each hand's own label. Context columns take
/// the most frequent value over the window's worn seconds.
pub fn build_feature_matrix<T: Scalar>(timeline: &UniformTimeline, spec: &WindowSpec, opts: &FeatureOptions<T>) -> Result<FeatureMatrix<T>> {
    let windows = partition_windows(timeline, spec);
    let rows: Vec<WindowRows<T>> = windows
        .into_par_iter()
        .filter_map(|w| window_rows(timeline, w, opts))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyFeatureMatrix);
    }
    let n = rows.len() * 2;
    let mut meta = Vec::with_capacity(n);
    let mut numeric: Vec<Vec<T>> = (0..22).map(|_| Vec::with_capacity(n)).collect();
    let mut location = Vec::with_capacity(n);
    let mut activity = Vec::with_capacity(n);
    let mut time_of_day = Vec::with_capacity(n);
    for r in &rows {
        for hand in Hand::ALL {
            meta.push(RowMeta {
                window_id: r.window.id,
                window_start: timeline.time_at(r.window.range.start),
                window_len_s: spec.length_s,
                hand: *hand,
                label: timeline.role(*hand),
                device_setting: timeline.device_setting,
            });
            for (col, v) in numeric.iter_mut().zip(r.numeric[hand.index()]) {
                col.push(v);
            }
            location.push(r.location.as_str());
            activity.push(r.activity.as_str());
            time_of_day.push(r.time_of_day.as_str());
        }
    }
    let mut columns: Vec<Column<T>> = FEATURE_NAMES[..22]
        .iter()
        .zip(numeric)
        .map(|(name, values)| Column::numeric(*name, values))
        .collect();
    columns.push(Column::categorical("location", &location));
    columns.push(Column::categorical("activity", &activity));
    columns.push(Column::categorical("time_of_day", &time_of_day));
    FeatureMatrix::new(meta, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_names_partition() {
        let mut all: Vec<&str> = HR_TIME_FEATURES.to_vec();
        all.extend(HR_FREQ_FEATURES);
        all.extend(["steps_cumsum", "calories_cumsum", "location", "activity", "time_of_day"]);
        assert_eq!(all, FEATURE_NAMES);
    }

    #[test]
    fn window_spec_validation() {
        assert!(WindowSpec::minutes(10).is_ok());
        assert!(WindowSpec::minutes(7).is_err());
        assert!(WindowSpec::new(420, 0.5, true).is_ok());
        assert!(WindowSpec::new(600, 0.0, false).is_err());
        assert_eq!(WindowSpec::parse_length("10m").unwrap(), 600);
        assert_eq!(WindowSpec::parse_length("90s").unwrap(), 90);
        assert_eq!(WindowSpec::parse_length("5").unwrap(), 300);
        assert!(WindowSpec::parse_length("ten").is_err());
        assert_eq!(WindowSpec::new(90, 0.5, true).unwrap().label(), "90s");
    }

    #[test]
    fn count_features_sum() {
        let mut steps = vec![0.0f64; 60];
        steps[30] = 34.0;
        assert_eq!(extract_count_features(&steps), 34.0);
        assert_eq!(extract_count_features(&[0.0f64; 60]), 0.0);
        let mut cal = vec![0.0f64; 300];
        for k in [0, 60, 120] {
            cal[k] = 1.2;
        }
        assert!((extract_count_features(&cal) - 3.6).abs() < 1e-12);
    }

    #[test]
    fn short_inputs_rejected() {
        assert!(extract_hr_time_features(&[70.0f64], &PeakParams::default()).is_err());
        assert!(extract_hr_freq_features(&[70.0f64; 7]).is_err());
        assert_eq!(extract_hr_freq_features(&[70.0f64; 60]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn mode_prefers_first_on_tie() {
        assert_eq!(mode([2, 1, 1, 2].into_iter()), Some(2));
        assert_eq!(mode([2, 1, 1].into_iter()), Some(1));
    }
}
