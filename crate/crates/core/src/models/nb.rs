use serde::{Deserialize, Serialize};

use super::encode::{RawFeature, UNSEEN};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NbFeature {
    /// Per-class mean and variance.
    Normal { mean: [f64; 2], var: [f64; 2] },
    /// Per-class Laplace-smoothed level probabilities.
    Multinomial { prob: [Vec<f64>; 2] },
}

/// Naive Bayes with normal likelihoods for numeric features and smoothed
/// level frequencies for categorical ones; empirical class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub features: Vec<NbFeature>,
}

impl GaussianNb {
    pub fn fit<T: Scalar>(features: &[RawFeature<T>], n_levels: &[usize], y: &[usize], var_floor: f64) -> GaussianNb {
        let mut count = [0usize; 2];
        for &c in y {
            count[c] += 1;
        }
        let n = y.len() as f64;
        let log_prior = [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()];
        let features = features
            .iter()
            .zip(n_levels)
            .map(|(f, &levels)| match f {
                RawFeature::Num(v) => {
                    let mut mean = [0.0; 2];
                    for (i, &x) in v.iter().enumerate() {
                        mean[y[i]] += x.to_f64_lossy();
                    }
                    for c in 0..2 {
                        mean[c] /= count[c].max(1) as f64;
                    }
                    let mut var = [0.0; 2];
                    for (i, &x) in v.iter().enumerate() {
                        let d = x.to_f64_lossy() - mean[y[i]];
                        var[y[i]] += d * d;
                    }
                    for c in 0..2 {
                        var[c] = if count[c] > 1 { var[c] / (count[c] - 1) as f64 } else { 0.0 };
                        var[c] = var[c].max(var_floor);
                    }
                    NbFeature::Normal { mean, var }
                }
                RawFeature::Cat(codes) => {
                    let mut freq = [vec![1.0; levels], vec![1.0; levels]];
                    for (i, &c) in codes.iter().enumerate() {
                        if c != UNSEEN {
                            freq[y[i]][c as usize] += 1.0;
                        }
                    }
                    for c in 0..2 {
                        let total: f64 = freq[c].iter().sum();
                        freq[c].iter_mut().for_each(|p| *p /= total);
                    }
                    NbFeature::Multinomial { prob: freq }
                }
            })
            .collect();
        GaussianNb { log_prior, features }
    }

    /// Log joint likelihood per class, up to a shared constant.
    pub fn log_joint<T: Scalar>(&self, features: &[RawFeature<T>], row: usize) -> [f64; 2] {
        let mut s = self.log_prior;
        for (model, f) in self.features.iter().zip(features) {
            match (model, f) {
                (NbFeature::Normal { mean, var }, RawFeature::Num(v)) => {
                    let x = v[row].to_f64_lossy();
                    for c in 0..2 {
                        s[c] += -0.5 * (2.0 * std::f64::consts::PI * var[c]).ln() - (x - mean[c]).powi(2) / (2.0 * var[c]);
                    }
                }
                (NbFeature::Multinomial { prob }, RawFeature::Cat(codes)) => {
                    let code = codes[row];
                    if code != UNSEEN {
                        for c in 0..2 {
                            s[c] += prob[c][code as usize].ln();
                        }
                    }
                }
                _ => panic!("feature kind does not match the fitted model"),
            }
        }
        s
    }

    pub fn predict<T: Scalar>(&self, features: &[RawFeature<T>]) -> Vec<usize> {
        let n = features.first().map_or(0, RawFeature::len);
        (0..n)
            .map(|r| {
                let s = self.log_joint(features, r);
                usize::from(s[1] > s[0])
            })
            .collect()
    }
}
