//! Column schema checks and the numeric encodings models train on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ColumnData, FeatureMatrix};
use crate::scalar::Scalar;

/// Category code for a level not seen at training time.
pub const UNSEEN: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    /// Training levels for categorical columns, `None` for numeric ones.
    pub levels: Option<Vec<String>>,
}

/// The feature columns a model was trained on, in training order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

/// One feature column aligned to a schema.
#[derive(Debug, Clone, PartialEq)]
pub enum RawFeature<T> {
    Num(Vec<T>),
    /// Codes index the schema's training levels; unknown tokens map to [`UNSEEN`].
    Cat(Vec<u32>),
}

impl<T: Scalar> RawFeature<T> {
    pub fn len(&self) -> usize {
        match self {
            RawFeature::Num(v) => v.len(),
            RawFeature::Cat(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Schema {
    pub fn of<T: Scalar>(matrix: &FeatureMatrix<T>) -> Schema {
        Schema {
            columns: matrix
                .columns
                .iter()
                .map(|c| ColumnSchema {
                    name: c.name.clone(),
                    levels: match &c.data {
                        ColumnData::Numeric(_) => None,
                        ColumnData::Categorical { levels, .. } => Some(levels.clone()),
                    },
                })
                .collect(),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Errors naming every missing and unexpected column.
    pub fn check<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        let missing: Vec<String> = self
            .columns
            .iter()
            .filter(|c| !names.iter().any(|n| n.as_ref() == c.name))
            .map(|c| c.name.clone())
            .collect();
        let extra: Vec<String> = names
            .iter()
            .map(|n| n.as_ref())
            .filter(|n| !self.columns.iter().any(|c| c.name == *n))
            .map(str::to_string)
            .collect();
        if missing.is_empty() && extra.is_empty() {
            Ok(())
        } else {
            Err(Error::SchemaMismatch { missing, extra })
        }
    }

    /// Pulls the schema's columns out of `matrix` in schema order, remapping
    /// categorical codes onto the training levels.
    pub fn gather<T: Scalar>(&self, matrix: &FeatureMatrix<T>) -> Result<Vec<RawFeature<T>>> {
        self.check(&matrix.column_names())?;
        self.columns
            .iter()
            .map(|spec| {
                let col = matrix.column(&spec.name).expect("checked above");
                match (&spec.levels, &col.data) {
                    (None, ColumnData::Numeric(v)) => Ok(RawFeature::Num(v.clone())),
                    (Some(train), ColumnData::Categorical { levels, codes }) => {
                        let map: Vec<u32> = levels
                            .iter()
                            .map(|l| train.iter().position(|t| t == l).map_or(UNSEEN, |p| p as u32))
                            .collect();
                        Ok(RawFeature::Cat(codes.iter().map(|&c| map[c as usize]).collect()))
                    }
                    _ => Err(Error::Invalid(format!("column {:?} changed between numeric and categorical", spec.name))),
                }
            })
            .collect()
    }

    /// Width after one-hot expansion.
    pub fn encoded_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.levels.as_ref().map_or(1, Vec::len))
            .sum()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Dense<T> {
        let n_cols = rows.first().map_or(0, Vec::len);
        Dense {
            n_rows: rows.len(),
            n_cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dense<T> {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Dense {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

/// Per-column mean and scale for numeric columns, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Sample standard deviation; constant columns keep scale 1.
    pub fn fit(features: &[RawFeature<T>]) -> Standardizer<T> {
        let mut mean = Vec::new();
        let mut scale = Vec::new();
        for f in features {
            if let RawFeature::Num(v) = f {
                let n = T::of_usize(v.len());
                let m = v.iter().copied().sum::<T>() / n;
                let var = if v.len() > 1 {
                    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (n - T::one())
                } else {
                    T::zero()
                };
                let sd = var.sqrt();
                mean.push(m);
                scale.push(if sd > T::zero() && sd.is_finite() { sd } else { T::one() });
            }
        }
        Standardizer { mean, scale }
    }
}

/// Numeric columns (optionally z-scored) followed in place by one-hot blocks
/// for categorical columns. Unseen levels encode as all zeros.
pub fn encode_dense<T: Scalar>(schema: &Schema, features: &[RawFeature<T>], standardizer: Option<&Standardizer<T>>) -> Dense<T> {
    let n = features.first().map_or(0, RawFeature::len);
    let width = schema.encoded_width();
    let mut data = vec![T::zero(); n * width];
    let mut offset = 0;
    let mut numeric = 0;
    for (spec, f) in schema.columns.iter().zip(features) {
        match f {
            RawFeature::Num(v) => {
                let (m, s) = match standardizer {
                    Some(st) => (st.mean[numeric], st.scale[numeric]),
                    None => (T::zero(), T::one()),
                };
                for (i, &x) in v.iter().enumerate() {
                    data[i * width + offset] = (x - m) / s;
                }
                numeric += 1;
                offset += 1;
            }
            RawFeature::Cat(codes) => {
                for (i, &c) in codes.iter().enumerate() {
                    if c != UNSEEN {
                        data[i * width + offset + c as usize] = T::one();
                    }
                }
                offset += spec.levels.as_ref().map_or(0, Vec::len);
            }
        }
    }
    Dense {
        n_rows: n,
        n_cols: width,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Column;
    use crate::matrix::RowMeta;

    fn matrix(tokens: &[&str]) -> FeatureMatrix<f64> {
        FeatureMatrix::new(
            RowMeta::paired(tokens.len()),
            vec![
                Column::numeric("x", (0..tokens.len()).map(|i| i as f64).collect()),
                Column::categorical("activity", tokens),
            ],
        )
        .unwrap()
    }

    #[test]
    fn remaps_levels_and_marks_unseen() {
        let train = matrix(&["eating", "working"]);
        let schema = Schema::of(&train);
        let test = matrix(&["cooking", "working"]);
        let raw = schema.gather(&test).unwrap();
        assert_eq!(raw[1], RawFeature::Cat(vec![UNSEEN, 1]));
        let dense = encode_dense(&schema, &raw, None);
        assert_eq!(dense.n_cols, 3);
        assert_eq!(dense.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(dense.row(1), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn schema_mismatch_names_columns() {
        let schema = Schema::of(&matrix(&["a", "b"]));
        let err = schema.check(&["x", "steps"]).unwrap_err();
        match err {
            Error::SchemaMismatch { missing, extra } => {
                assert_eq!(missing, vec!["activity"]);
                assert_eq!(extra, vec!["steps"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn standardizer_uses_sample_sd() {
        let st = Standardizer::fit(&[RawFeature::Num(vec![1.0, 2.0, 3.0]), RawFeature::Num(vec![5.0; 3])]);
        assert_eq!(st.mean, vec![2.0, 5.0]);
        assert_eq!(st.scale, vec![1.0, 1.0]);
    }
}
