//! Frequency-domain summaries of a 1 Hz heart-rate trace.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Scalar;

pub const MIN_SPECTRAL_LEN: usize = 8;

/// `[dominant frequency (Hz), total power, spectral entropy (bits)]`.
///
/// The mean is removed first and the zero-frequency bin is excluded. Power
/// is the one-sided periodogram `|X_k|^2 / n` for `k = 1..=n/2`. A flat
/// (zero-power) input yields all zeros.
pub fn spectral_features<T: Scalar>(hr: &[T]) -> [T; 3] {
    let n = hr.len();
    if n < 2 {
        return [T::zero(); 3];
    }
    let nf = T::of_usize(n);
    let mean = hr.iter().copied().sum::<T>() / nf;
    let scale = hr.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let mut buf: Vec<Complex<T>> = hr.iter().map(|&v| Complex::new(v - mean, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let power: Vec<T> = buf[1..=n / 2].iter().map(|c| c.norm_sqr() / nf).collect();
    let total: T = power.iter().copied().sum();
    let floor = (T::epsilon() * scale) * (T::epsilon() * scale) * nf;
    if !(total > floor) {
        return [T::zero(); 3];
    }
    let mut best = 0;
    for (k, &p) in power.iter().enumerate() {
        if p > power[best] {
            best = k;
        }
    }
    let dominant = T::of_usize(best + 1) / nf;
    let entropy = power
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum::<T>()
        .max(T::zero());
    [dominant, total, entropy]
}
