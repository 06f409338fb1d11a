//! Greedy minimum-redundancy maximum-relevance ranking.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::discretize::{discretize_column, DiscretizationSpec};
use super::mi::mutual_information;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrmrScheme {
    /// Relevance divided by mean redundancy.
    Miq,
    /// Relevance minus mean redundancy.
    Mid,
}

impl std::str::FromStr for MrmrScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "miq" => Ok(MrmrScheme::Miq),
            "mid" => Ok(MrmrScheme::Mid),
            _ => Err(Error::UnknownToken {
                kind: "mrmr scheme",
                token: s.to_string(),
            }),
        }
    }
}

impl MrmrScheme {
    pub fn score(self, relevance: f64, redundancy: f64) -> f64 {
        match self {
            MrmrScheme::Miq => relevance / redundancy.max(f64::EPSILON),
            MrmrScheme::Mid => relevance - redundancy,
        }
    }
}

/// Scores this close (relative) count as tied; ties go to the lexicographically
/// smaller feature name.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub fn scores_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Selection score at the step the feature was picked.
    pub score: f64,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrRanking {
    pub scheme: MrmrScheme,
    pub entries: Vec<RankedFeature>,
}

impl MrmrRanking {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.entries.iter().take(k).map(|e| e.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// `rank,feature,score,selected` with the first `top_k` rows selected.
    pub fn to_csv(&self, top_k: usize) -> String {
        let mut out = String::from("rank,feature,score,selected\n");
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, e.name, e.score, u8::from(i < top_k)).unwrap();
        }
        out
    }

    /// Tab-separated bar-chart table; `relative` is the score over the top score.
    pub fn to_chart_tsv(&self, top_k: usize) -> String {
        let max = self.entries.iter().map(|e| e.score).fold(0.0, f64::max);
        let mut out = String::from("rank\tfeature\tscore\trelative\tselected\n");
        for (i, e) in self.entries.iter().enumerate() {
            let rel = if max > 0.0 { e.score / max } else { 0.0 };
            writeln!(out, "{}\t{}\t{}\t{}\t{}", i + 1, e.name, e.score, rel, u8::from(i < top_k)).unwrap();
        }
        out
    }

    /// Reads a ranking written by [`MrmrRanking::to_csv`]; relevance is not stored there.
    pub fn read_csv(path: &Path, scheme: MrmrScheme) -> Result<MrmrRanking> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if !header.starts_with("rank,feature,score") {
            return Err(Error::parse(path, "expected header rank,feature,score"));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::parse(path, format!("line {}: malformed ranking row", i + 2));
            if f.len() < 3 {
                return Err(bad());
            }
            entries.push(RankedFeature {
                name: f[1].to_string(),
                score: f[2].parse().map_err(|_| bad())?,
                relevance: f64::NAN,
            });
        }
        Ok(MrmrRanking { scheme, entries })
    }
}

/// Ranks already-discretized features against a discrete label.
///
/// The first pick maximizes relevance `MI(f, label)`; each later pick
/// maximizes the scheme's combination of relevance and the mean MI with the
/// features picked so far.
pub fn mrmr_rank_discrete(names: &[String], features: &[Vec<u32>], label: &[u32], scheme: MrmrScheme) -> Result<MrmrRanking> {
    if names.len() != features.len() {
        return Err(Error::LengthMismatch {
            left: names.len(),
            right: features.len(),
        });
    }
    if features.is_empty() || label.len() < 2 {
        return Err(Error::Invalid("ranking needs at least one feature and two rows".into()));
    }
    let relevance: Vec<f64> = features
        .par_iter()
        .map(|f| mutual_information(f, label))
        .collect::<Result<_>>()?;

    // candidates visited in name order so ties resolve lexicographically
    let mut remaining: Vec<usize> = (0..names.len()).collect();
    remaining.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut redundancy_sum = vec![0.0; names.len()];
    let mut entries = Vec::with_capacity(names.len());

    let pick = |remaining: &[usize], score: &dyn Fn(usize) -> f64| -> (usize, f64) {
        let mut best = 0;
        let mut best_score = score(remaining[0]);
        for (pos, &f) in remaining.iter().enumerate().skip(1) {
            let s = score(f);
            if s > best_score && !scores_tied(s, best_score) {
                best = pos;
                best_score = s;
            }
        }
        (best, best_score)
    };

    let (pos, score) = pick(&remaining, &|f| relevance[f]);
    let mut last = remaining.remove(pos);
    entries.push(RankedFeature {
        name: names[last].clone(),
        score,
        relevance: relevance[last],
    });

    while !remaining.is_empty() {
        let added: Vec<f64> = remaining
            .par_iter()
            .map(|&f| mutual_information(&features[f], &features[last]))
            .collect::<Result<_>>()?;
        for (&f, mi) in remaining.iter().zip(added) {
            redundancy_sum[f] += mi;
        }
        let selected = entries.len() as f64;
        let (pos, score) = pick(&remaining, &|f| scheme.score(relevance[f], redundancy_sum[f] / selected));
        last = remaining.remove(pos);
        entries.push(RankedFeature {
            name: names[last].clone(),
            score,
            relevance: relevance[last],
        });
    }
    Ok(MrmrRanking { scheme, entries })
}

/// Ranks every feature column of the matrix against the hand label.
pub fn mrmr_rank<T: Scalar>(matrix: &FeatureMatrix<T>, scheme: MrmrScheme, spec: &DiscretizationSpec) -> Result<MrmrRanking> {
    if matrix.n_rows() < 2 || matrix.columns.is_empty() {
        return Err(Error::EmptyFeatureMatrix);
    }
    let names: Vec<String> = matrix.columns.iter().map(|c| c.name.clone()).collect();
    let features: Vec<Vec<u32>> = matrix
        .columns
        .par_iter()
        .map(|c| discretize_column(c, spec))
        .collect::<Result<_>>()?;
    let label: Vec<u32> = matrix.classes().into_iter().map(|c| c as u32).collect();
    mrmr_rank_discrete(&names, &features, &label, scheme)
}
