//! Prominence-based peak counting.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakParams<T> {
    /// Minimum topographic prominence, in the signal's units.
    pub prominence: T,
    /// Peaks closer than this many samples compete; only the highest survives.
    pub min_separation: usize,
}

impl<T: Scalar> Default for PeakParams<T> {
    fn default() -> Self {
        PeakParams {
            prominence: T::of(3.0),
            min_separation: 5,
        }
    }
}

/// Local maxima of `x`. A flat top counts once, at its middle sample, when
/// both of its neighbours are lower. End points are never maxima.
pub fn local_maxima<T: Scalar>(x: &[T]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of a peak above the higher of its two bases. Each base is the
/// lowest point between the peak and the nearest strictly higher sample on
/// that side (or the signal end).
pub fn prominence<T: Scalar>(x: &[T], peak: usize) -> T {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Counts local maxima with prominence at least `min_prominence`, keeping
/// only the highest of any group closer than `min_separation` samples.
pub fn count_peaks<T: Scalar>(signal: &[T], min_prominence: T, min_separation: usize) -> usize {
    let candidates: Vec<usize> = local_maxima(signal)
        .into_iter()
        .filter(|&p| prominence(signal, p) >= min_prominence)
        .collect();
    if min_separation <= 1 {
        return candidates.len();
    }
    // tallest first; equal heights keep the earlier peak
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        signal[candidates[b]]
            .partial_cmp(&signal[candidates[a]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut removed = vec![false; candidates.len()];
    let mut kept = 0;
    for &k in &order {
        if removed[k] {
            continue;
        }
        kept += 1;
        let p = candidates[k];
        for (j, &q) in candidates.iter().enumerate() {
            if j != k && p.abs_diff(q) < min_separation {
                removed[j] = true;
            }
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_has_no_peaks() {
        let up: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(count_peaks(&up, 3.0, 1), 0);
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(count_peaks(&down, 3.0, 1), 0);
    }

    #[test]
    fn two_isolated_equal_peaks() {
        assert_eq!(count_peaks(&[0.0, 10.0, 0.0, 10.0, 0.0], 3.0, 1), 2);
    }

    #[test]
    fn separation_suppresses_lower_bump() {
        // bump at index 3 has prominence 9 - 8 = 1 and lies 2 samples from the taller peak
        let x = [0.0, 10.0, 8.0, 9.0, 0.0];
        assert_eq!(prominence(&x, 3), 1.0);
        assert_eq!(count_peaks(&x, 3.0, 5), 1);
        assert_eq!(count_peaks(&x, 0.5, 5), 1);
        assert_eq!(count_peaks(&x, 0.5, 1), 2);
    }

    #[test]
    fn plateau_counts_once() {
        let x = [60.0, 65.0, 70.0, 70.0, 70.0, 65.0, 60.0];
        assert_eq!(local_maxima(&x), vec![3]);
        assert_eq!(count_peaks(&x, 3.0, 1), 1);
        // a shoulder is not a peak
        assert!(local_maxima(&[1.0, 2.0, 2.0, 3.0]).is_empty());
    }

    #[test]
    fn prominence_uses_higher_base() {
        let x = [5.0, 0.0, 8.0, 3.0, 12.0, 1.0];
        assert_eq!(prominence(&x, 2), 5.0);
        assert_eq!(prominence(&x, 4), 11.0);
    }
}
