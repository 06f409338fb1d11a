//! Holdout splits, stratified k-fold cross-validation and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_model, ModelSpec, TrainedModel};
use crate::domain::{token_enum, HandRole};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

token_enum!(
    /// How rows are assigned to folds and holdout sides. `Grouped` keeps the
    /// two rows of a window together; with `Random`, a window's partner row
    /// (same context, opposite label) can land on the other side.
    SplitMode, "split mode" {
        Random => "random",
        Grouped => "grouped",
    }
);

/// Rows in a split unit share a side. Units are stratified by their class
/// composition.
fn units<T: Scalar>(matrix: &FeatureMatrix<T>, mode: SplitMode) -> BTreeMap<[usize; 2], Vec<Vec<usize>>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, m) in matrix.meta.iter().enumerate() {
        let key = match mode {
            SplitMode::Random => i,
            SplitMode::Grouped => m.window_id,
        };
        groups.entry(key).or_default().push(i);
    }
    let mut strata: BTreeMap<[usize; 2], Vec<Vec<usize>>> = BTreeMap::new();
    for rows in groups.into_values() {
        let mut comp = [0; 2];
        for &r in &rows {
            comp[matrix.meta[r].label.class()] += 1;
        }
        strata.entry(comp).or_default().push(rows);
    }
    strata
}

/// Row indices of the (train, test) sides.
pub fn holdout_indices<T: Scalar>(matrix: &FeatureMatrix<T>, test_fraction: f64, mode: SplitMode, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} must be in (0, 1)")));
    }
    if matrix.n_rows() < 10 {
        return Err(Error::Invalid(format!("holdout split needs at least 10 rows, got {}", matrix.n_rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: Vec<Vec<Vec<usize>>> = units(matrix, mode).into_values().collect();
    for s in &mut strata {
        s.shuffle(&mut rng);
    }
    // largest-remainder quotas so the total is the rounded exact fraction
    let total_units: usize = strata.iter().map(Vec::len).sum();
    let target = (test_fraction * total_units as f64).round() as usize;
    let exact: Vec<f64> = strata.iter().map(|s| test_fraction * s.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).partial_cmp(&(exact[a] - exact[a].floor())).unwrap().then(a.cmp(&b)));
    let mut short = target.saturating_sub(quota.iter().sum());
    for &s in order.iter().cycle().take(order.len() * 2) {
        if short == 0 {
            break;
        }
        if quota[s] < strata[s].len() {
            quota[s] += 1;
            short -= 1;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, q) in strata.iter().zip(&quota) {
        for (u, rows) in s.iter().enumerate() {
            if u < *q { &mut test } else { &mut train }.extend_from_slice(rows);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    for (side, rows) in [("train", &train), ("test", &test)] {
        let mut seen = [false; 2];
        for &r in rows.iter() {
            seen[matrix.meta[r].label.class()] = true;
        }
        if seen.contains(&false) {
            return Err(Error::Invalid(format!("holdout split leaves a class absent from the {side} side")));
        }
    }
    Ok((train, test))
}

/// Stratified holdout split; deterministic given the seed.
pub fn holdout_split<T: Scalar>(matrix: &FeatureMatrix<T>, test_fraction: f64, mode: SplitMode, seed: u64) -> Result<(FeatureMatrix<T>, FeatureMatrix<T>)> {
    let (train, test) = holdout_indices(matrix, test_fraction, mode, seed)?;
    Ok((matrix.take_rows(&train), matrix.take_rows(&test)))
}

/// Fold index per row for stratified k-fold.
pub fn fold_assignments<T: Scalar>(matrix: &FeatureMatrix<T>, k: usize, mode: SplitMode, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    let counts = matrix.class_counts();
    if counts.iter().any(|&c| c < k) {
        return Err(Error::Invalid(format!("class counts {counts:?} are below k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; matrix.n_rows()];
    let mut next = 0;
    for mut stratum in units(matrix, mode).into_values() {
        stratum.shuffle(&mut rng);
        for rows in stratum {
            for r in rows {
                fold[r] = next % k;
            }
            next += 1;
        }
    }
    Ok(fold)
}

/// 2x2 counts, rows true class, columns predicted; index 1 is dominant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            m.counts[t][p] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for t in 0..2 {
            for p in 0..2 {
                self.counts[t][p] += other.counts[t][p];
            }
        }
    }

    /// Class-labelled 2x2 table.
    pub fn render(&self) -> String {
        let names = [HandRole::Nondominant.as_str(), HandRole::Dominant.as_str()];
        let mut out = format!("{:<18}{:>16}{:>16}\n", "true \\ predicted", names[0], names[1]);
        for t in 0..2 {
            writeln!(out, "{:<18}{:>16}{:>16}", names[t], self.counts[t][0], self.counts[t][1]).unwrap();
        }
        out
    }
}

pub struct CvOutcome<T> {
    pub confusion: ConfusionMatrix,
    pub fold_accuracies: Vec<f64>,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<usize>,
    pub fold_models: Vec<TrainedModel<T>>,
}

impl<T> CvOutcome<T> {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

/// Stratified k-fold CV; folds train in parallel and are assembled in fold order.
pub fn cross_validate<T: Scalar>(matrix: &FeatureMatrix<T>, spec: &ModelSpec, k: usize, mode: SplitMode, seed: u64) -> Result<CvOutcome<T>> {
    let fold = fold_assignments(matrix, k, mode, seed)?;
    let classes = matrix.classes();
    let per_fold: Vec<(Vec<usize>, Vec<usize>, TrainedModel<T>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..matrix.n_rows()).partition(|&r| fold[r] == f);
            let model = train_model(&matrix.take_rows(&train), spec)?;
            let pred = model.predict_classes(&matrix.take_rows(&val))?;
            Ok((val, pred, model))
        })
        .collect::<Result<_>>()?;
    let mut predictions = vec![0; matrix.n_rows()];
    let mut confusion = ConfusionMatrix::default();
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_models = Vec::with_capacity(k);
    for (val, pred, model) in per_fold {
        let truth: Vec<usize> = val.iter().map(|&r| classes[r]).collect();
        let cm = ConfusionMatrix::from_predictions(&truth, &pred);
        confusion.add(&cm);
        fold_accuracies.push(cm.accuracy());
        for (&r, &p) in val.iter().zip(&pred) {
            predictions[r] = p;
        }
        fold_models.push(model);
    }
    Ok(CvOutcome {
        confusion,
        fold_accuracies,
        predictions,
        fold_models,
    })
}

pub fn evaluate_holdout<T: Scalar>(model: &TrainedModel<T>, test: &FeatureMatrix<T>) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::EmptyFeatureMatrix);
    }
    let pred = model.predict_classes(test)?;
    Ok(ConfusionMatrix::from_predictions(&test.classes(), &pred))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub folds: usize,
    pub test_fraction: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            folds: 5,
            test_fraction: 0.10,
            split_mode: SplitMode::Random,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: ModelSpec,
    pub features: Vec<String>,
    pub options: EvalOptions,
    pub n_train: usize,
    pub n_test: usize,
    pub cv_confusion: ConfusionMatrix,
    pub cv_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub test_confusion: ConfusionMatrix,
    pub test_accuracy: f64,
    /// Kept out of the report file so reruns are byte-identical.
    #[serde(skip)]
    pub train_wall_time_s: f64,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<EvaluationReport> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "model: {}", self.model.kind).unwrap();
        writeln!(out, "features ({}): {}", self.features.len(), self.features.join(", ")).unwrap();
        writeln!(
            out,
            "split: {} folds, {:.0}% test, {} mode, seed {}",
            self.options.folds,
            self.options.test_fraction * 100.0,
            self.options.split_mode,
            self.options.seed
        )
        .unwrap();
        writeln!(out, "rows: {} train, {} test", self.n_train, self.n_test).unwrap();
        let folds: Vec<String> = self.fold_accuracies.iter().map(|a| format!("{a:.3}")).collect();
        writeln!(out, "cross-validation accuracy: {:.4} (folds {})", self.cv_accuracy, folds.join(" ")).unwrap();
        out.push_str(&self.cv_confusion.render());
        writeln!(out, "test accuracy: {:.4}", self.test_accuracy).unwrap();
        out.push_str(&self.test_confusion.render());
        out
    }
}

/// Holdout split, k-fold CV on the training side, then a final fit on the
/// whole training side scored on the test side.
pub fn evaluate<T: Scalar>(matrix: &FeatureMatrix<T>, spec: &ModelSpec, opts: &EvalOptions) -> Result<EvaluationReport> {
    let started = Instant::now();
    let (train, test) = holdout_split(matrix, opts.test_fraction, opts.split_mode, opts.seed)?;
    let cv = cross_validate(&train, spec, opts.folds, opts.split_mode, opts.seed)?;
    let model = train_model(&train, spec)?;
    let test_confusion = evaluate_holdout(&model, &test)?;
    let elapsed = started.elapsed().as_secs_f64();
    info!("{}: trained and evaluated in {elapsed:.2} s", spec.kind);
    Ok(EvaluationReport {
        model: spec.clone(),
        features: matrix.column_names().iter().map(|s| s.to_string()).collect(),
        options: *opts,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        cv_accuracy: cv.accuracy(),
        cv_confusion: cv.confusion,
        fold_accuracies: cv.fold_accuracies,
        test_accuracy: test_confusion.accuracy(),
        test_confusion,
        train_wall_time_s: elapsed,
    })
}
