//! Time-domain descriptive statistics of a heart-rate window.

use super::peaks::{count_peaks, PeakParams};
use crate::scalar::Scalar;

/// Linear interpolation between order statistics at position `q * (n - 1)`.
/// `sorted` must be ascending and non-empty.
pub fn percentile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sorted_copy<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite heart-rate values"));
    s
}

pub fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::of_usize(x.len())
}

/// The 17 time-domain features, in [`super::HR_TIME_FEATURES`] order.
///
/// Standard deviation and variance use the `n - 1` denominator; skewness and
/// excess kurtosis use population moments and are 0 for a flat window.
/// Requires at least two samples.
pub fn time_features<T: Scalar>(hr: &[T], peaks: &PeakParams<T>) -> [T; 17] {
    assert!(hr.len() >= 2, "time features need at least two samples");
    let n = T::of_usize(hr.len());
    let sorted = sorted_copy(hr);
    let mean = mean(hr);
    let median = percentile_sorted(&sorted, 0.5);
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in hr {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - T::one());
    let std = variance.sqrt();
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = sorted[0].abs().max(sorted[sorted.len() - 1].abs());
    let flat = m2 <= (T::epsilon() * scale) * (T::epsilon() * scale);
    let (skewness, kurtosis) = if flat {
        (T::zero(), T::zero())
    } else {
        (m3 / m2.powf(T::of(1.5)), m4 / (m2 * m2) - T::of(3.0))
    };
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let rms = (hr.iter().map(|&v| v * v).sum::<T>() / n).sqrt();
    let p25 = percentile_sorted(&sorted, 0.25);
    let p75 = percentile_sorted(&sorted, 0.75);
    let deviations = sorted_copy(&hr.iter().map(|&v| (v - median).abs()).collect::<Vec<_>>());
    let mad = percentile_sorted(&deviations, 0.5);

    let t_mean = (n - T::one()) / T::of(2.0);
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (i, &v) in hr.iter().enumerate() {
        let dt = T::of_usize(i) - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let mean_abs_diff = hr.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>() / (n - T::one());
    let peak_count = T::of_usize(count_peaks(hr, peaks.prominence, peaks.min_separation));

    [
        mean,
        median,
        std,
        variance,
        min,
        max,
        max - min,
        rms,
        p75 - p25,
        p25,
        p75,
        mad,
        skewness,
        kurtosis,
        slope,
        mean_abs_diff,
        peak_count,
    ]
}
