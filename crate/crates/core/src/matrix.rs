//! Column-oriented feature table with per-row window metadata.
//!
//! CSV layout: a header row, then one row per (window, hand):
//!
//! ```text
//! window_id,window_start,window_len_s,hand,device_setting,<feature columns...>,hand_role
//! ```
//!
//! Feature columns keep their order. `location`, `activity` and `time_of_day`
//! (and any column whose cells do not all parse as numbers) are categorical.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::domain::{DeviceSetting, Hand, HandRole};
use crate::error::{Error, Result};
use crate::ingest::CONTEXT_TIME_FORMAT;
use crate::scalar::Scalar;

pub const META_COLUMNS: [&str; 5] = ["window_id", "window_start", "window_len_s", "hand", "device_setting"];
pub const LABEL_COLUMN: &str = "hand_role";
pub const CATEGORICAL_COLUMNS: [&str; 3] = ["location", "activity", "time_of_day"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub window_id: usize,
    pub window_start: NaiveDateTime,
    pub window_len_s: u32,
    pub hand: Hand,
    pub label: HandRole,
    pub device_setting: DeviceSetting,
}

impl RowMeta {
    /// Placeholder metadata for `n` rows built by hand: row `i` belongs to
    /// window `i / 2`, even rows are the left hand, and the right hand is
    /// dominant. Windows are one minute apart from the Unix epoch.
    pub fn paired(n: usize) -> Vec<RowMeta> {
        (0..n)
            .map(|i| {
                let hand = if i % 2 == 0 { Hand::Left } else { Hand::Right };
                RowMeta {
                    window_id: i / 2,
                    window_start: chrono::DateTime::from_timestamp((i / 2) as i64 * 60, 0)
                        .expect("in range")
                        .naive_utc(),
                    window_len_s: 60,
                    hand,
                    label: if hand == Hand::Right { HandRole::Dominant } else { HandRole::Nondominant },
                    device_setting: DeviceSetting::ConfiguredPerHand,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData<T> {
    Numeric(Vec<T>),
    /// `codes[i]` indexes `levels`; levels are sorted.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl<T> ColumnData<T> {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnData::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column<T> {
    pub name: String,
    pub data: ColumnData<T>,
}

impl<T: Scalar> Column<T> {
    pub fn numeric(name: impl Into<String>, values: Vec<T>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    /// Builds a categorical column with sorted levels.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, tokens: &[S]) -> Self {
        let levels: Vec<String> = tokens
            .iter()
            .map(|t| t.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let codes = tokens
            .iter()
            .map(|t| levels.binary_search_by(|l| l.as_str().cmp(t.as_ref())).unwrap() as u32)
            .collect();
        Column {
            name: name.into(),
            data: ColumnData::Categorical { levels, codes },
        }
    }

    /// Cell `i` rendered as text.
    pub fn cell(&self, i: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => v[i].to_string(),
            ColumnData::Categorical { levels, codes } => levels[codes[i] as usize].clone(),
        }
    }

    pub fn token(&self, i: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Categorical { levels, codes } => Some(levels[codes[i] as usize].as_str()),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn value(&self, i: usize) -> Option<T> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v[i]),
            ColumnData::Categorical { .. } => None,
        }
    }

    fn take_rows(&self, rows: &[usize]) -> Column<T> {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }

    fn cast<U: Scalar>(&self) -> Column<U> {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(v.iter().map(|x| U::of(x.to_f64_lossy())).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: codes.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

/// One row per (window, hand), feature columns plus window metadata and label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub meta: Vec<RowMeta>,
    pub columns: Vec<Column<T>>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(meta: Vec<RowMeta>, columns: Vec<Column<T>>) -> Result<Self> {
        for c in &columns {
            if c.data.len() != meta.len() {
                return Err(Error::LengthMismatch {
                    left: meta.len(),
                    right: c.data.len(),
                });
            }
        }
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate column {:?}", c.name)));
            }
        }
        Ok(FeatureMatrix { meta, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column<T>> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Class per row, 1 for dominant.
    pub fn classes(&self) -> Vec<usize> {
        self.meta.iter().map(|m| m.label.class()).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for m in &self.meta {
            counts[m.label.class()] += 1;
        }
        counts
    }

    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix<T> {
        FeatureMatrix {
            meta: rows.iter().map(|&i| self.meta[i]).collect(),
            columns: self.columns.iter().map(|c| c.take_rows(rows)).collect(),
        }
    }

    /// Keeps the named columns, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix<T>> {
        let mut missing = Vec::new();
        let mut columns = Vec::new();
        for n in names {
            match self.column(n.as_ref()) {
                Some(c) => columns.push(c.clone()),
                None => missing.push(n.as_ref().to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::SchemaMismatch { missing, extra: vec![] });
        }
        FeatureMatrix::new(self.meta.clone(), columns)
    }

    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> FeatureMatrix<T> {
        FeatureMatrix {
            meta: self.meta.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| !names.iter().any(|n| n.as_ref() == c.name))
                .cloned()
                .collect(),
        }
    }

    pub fn push_column(&mut self, column: Column<T>) -> Result<()> {
        if column.data.len() != self.n_rows() {
            return Err(Error::LengthMismatch {
                left: self.n_rows(),
                right: column.data.len(),
            });
        }
        if self.column(&column.name).is_some() {
            return Err(Error::Invalid(format!("duplicate column {:?}", column.name)));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            meta: self.meta.clone(),
            columns: self.columns.iter().map(Column::cast).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = META_COLUMNS.to_vec();
        header.extend(self.column_names());
        header.push(LABEL_COLUMN);
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, m) in self.meta.iter().enumerate() {
            write!(
                out,
                "{},{},{},{},{}",
                m.window_id,
                m.window_start.format(CONTEXT_TIME_FORMAT),
                m.window_len_s,
                m.hand,
                m.device_setting
            )
            .unwrap();
            for c in &self.columns {
                out.push(',');
                out.push_str(&c.cell(i));
            }
            writeln!(out, ",{}", m.label).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv_str(text: &str) -> Result<FeatureMatrix<T>> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Invalid(format!("header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < META_COLUMNS.len() + 1
            || header[..META_COLUMNS.len()] != META_COLUMNS
            || header.last().map(String::as_str) != Some(LABEL_COLUMN)
        {
            return Err(Error::Invalid(format!(
                "expected header {},<features>,{LABEL_COLUMN}",
                META_COLUMNS.join(",")
            )));
        }
        let feature_names = &header[META_COLUMNS.len()..header.len() - 1];
        let mut meta = Vec::new();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); feature_names.len()];
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Invalid(format!("line {line}: {e}")))?;
            let bad = |what: &str, v: &str| Error::Invalid(format!("line {line}: bad {what} {v:?}"));
            let f = |k: usize| rec.get(k).unwrap_or("");
            meta.push(RowMeta {
                window_id: f(0).parse().map_err(|_| bad("window_id", f(0)))?,
                window_start: NaiveDateTime::parse_from_str(f(1), CONTEXT_TIME_FORMAT).map_err(|_| bad("window_start", f(1)))?,
                window_len_s: f(2).parse().map_err(|_| bad("window_len_s", f(2)))?,
                hand: f(3).parse()?,
                device_setting: f(4).parse()?,
                label: f(header.len() - 1).parse()?,
            });
            for (j, col) in cells.iter_mut().enumerate() {
                col.push(f(META_COLUMNS.len() + j).to_string());
            }
        }
        let mut columns = Vec::with_capacity(feature_names.len());
        for (name, col) in feature_names.iter().zip(cells) {
            let parsed: Option<Vec<T>> = if CATEGORICAL_COLUMNS.contains(&name.as_str()) {
                None
            } else {
                col.iter().map(|s| s.parse::<T>().ok()).collect()
            };
            columns.push(match parsed {
                Some(values) => Column::numeric(name.clone(), values),
                None => Column::categorical(name.clone(), &col),
            });
        }
        FeatureMatrix::new(meta, columns)
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix<T>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text).map_err(|e| match e {
            Error::Invalid(m) => Error::parse(path, m),
            other => Error::parse(path, other.to_string()),
        })
    }
}
