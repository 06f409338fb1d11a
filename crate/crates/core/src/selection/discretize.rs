use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Column, ColumnData};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinStrategy {
    Quantile,
    EqualWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSpec {
    pub bins: usize,
    pub strategy: BinStrategy,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        DiscretizationSpec {
            bins: 16,
            strategy: BinStrategy::Quantile,
        }
    }
}

impl DiscretizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("discretization needs at least 2 bins, got {}", self.bins)));
        }
        Ok(())
    }
}

/// Maps finite reals to bin indices.
///
/// Quantile bins cut at the order statistics `x[floor(j (n-1) / bins)]`,
/// `j = 1..bins`, and a value falls above a cut when strictly greater. That
/// is the same partition as cutting at linearly interpolated quantiles, and
/// it depends only on ranks, so strictly increasing transforms leave the
/// bins unchanged. Repeated cuts collapse, giving fewer effective bins.
pub fn discretize<T: Scalar>(values: &[T], spec: &DiscretizationSpec) -> Result<Vec<u32>> {
    spec.validate()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cannot discretize non-finite values".into()));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let (min, max) = values
        .iter()
        .fold((values[0], values[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if min == max {
        warn!("constant column discretized to a single bin");
        return Ok(vec![0; values.len()]);
    }
    Ok(match spec.strategy {
        BinStrategy::Quantile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            let mut cuts: Vec<T> = (1..spec.bins).map(|j| sorted[j * (n - 1) / spec.bins]).collect();
            cuts.dedup();
            values
                .iter()
                .map(|&v| cuts.partition_point(|&c| v > c) as u32)
                .collect()
        }
        BinStrategy::EqualWidth => {
            let bins = T::of_usize(spec.bins);
            let width = (max - min) / bins;
            values
                .iter()
                .map(|&v| {
                    let b = ((v - min) / width).floor().to_usize().unwrap_or(0);
                    b.min(spec.bins - 1) as u32
                })
                .collect()
        }
    })
}

/// Numeric columns are binned; categorical columns pass through as codes.
pub fn discretize_column<T: Scalar>(column: &Column<T>, spec: &DiscretizationSpec) -> Result<Vec<u32>> {
    match &column.data {
        ColumnData::Numeric(v) => discretize(v, spec),
        ColumnData::Categorical { codes, .. } => Ok(codes.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bins: usize, strategy: BinStrategy) -> DiscretizationSpec {
        DiscretizationSpec { bins, strategy }
    }

    #[test]
    fn median_split() {
        assert_eq!(discretize(&[1.0, 2.0, 3.0, 4.0], &spec(2, BinStrategy::Quantile)).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(discretize(&[4.0, 1.0, 3.0, 2.0], &spec(2, BinStrategy::Quantile)).unwrap(), vec![1, 0, 1, 0]);
    }

    #[test]
    fn constant_single_bin() {
        for s in [BinStrategy::Quantile, BinStrategy::EqualWidth] {
            assert_eq!(discretize(&[5.0; 7], &spec(16, s)).unwrap(), vec![0; 7]);
        }
    }

    #[test]
    fn equal_width_edges() {
        assert_eq!(discretize(&[0.0, 0.0, 0.0, 100.0], &spec(2, BinStrategy::EqualWidth)).unwrap(), vec![0, 0, 0, 1]);
        assert_eq!(discretize(&[0.0, 49.0, 50.0, 100.0], &spec(2, BinStrategy::EqualWidth)).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn ties_collapse_quantile_bins() {
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0];
        let b = discretize(&x, &spec(4, BinStrategy::Quantile)).unwrap();
        assert!(b[..6].iter().all(|&v| v == 0));
        assert_eq!((b[6], b[7]), (1, 1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(discretize(&[1.0, f64::NAN], &DiscretizationSpec::default()).is_err());
        assert!(discretize(&[1.0, 2.0], &spec(1, BinStrategy::Quantile)).is_err());
    }
}
