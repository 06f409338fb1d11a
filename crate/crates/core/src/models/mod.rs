//! Binary classifiers over feature matrices, with cross-validation and
//! holdout evaluation.
//!
//! Trees and naive Bayes consume categorical columns directly. The SVM, kNN
//! and logistic models see one-hot encoded categoricals and z-scored numeric
//! columns, with the scaling fit on training rows only and stored in the
//! model.

pub mod encode;
pub mod eval;
pub mod knn;
pub mod logistic;
pub mod nb;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use encode::{Dense, RawFeature, Schema, Standardizer};
pub use eval::{cross_validate, evaluate, evaluate_holdout, fold_assignments, holdout_split, ConfusionMatrix, CvOutcome, EvalOptions, EvaluationReport, SplitMode};
pub use knn::Knn;
pub use logistic::{LogisticObjective, LogisticParams, LogisticRegression};
pub use nb::GaussianNb;
pub use svm::{kkt_violation, solve_smo, QuadraticSvm, SvmParams, SvmSolution};
pub use tree::{BoostParams, BoostedTrees, DecisionTree, SplitRecord, TreeParams};

use crate::domain::{token_enum, HandRole};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

token_enum!(
    ModelKind, "model kind" {
        DecisionTree => "decision_tree",
        CoarseTree => "coarse_tree",
        BoostedTrees => "boosted_trees",
        QuadraticSvm => "quadratic_svm",
        Knn => "knn",
        GaussianNb => "gaussian_nb",
        LogisticRegression => "logistic_regression",
    }
);

impl ModelKind {
    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::DecisionTree | ModelKind::CoarseTree => &["max_splits", "min_parent_size", "max_depth"],
            ModelKind::BoostedTrees => &["n_learners", "learning_rate", "max_splits", "min_parent_size"],
            ModelKind::QuadraticSvm => &["box_constraint", "tolerance", "max_iter", "cache_mb"],
            ModelKind::Knn => &["k"],
            ModelKind::GaussianNb => &["var_floor"],
            ModelKind::LogisticRegression => &["lambda", "grad_tol", "max_iter"],
        }
    }

    /// Whether the model trains on the one-hot, z-scored encoding.
    pub fn uses_dense_encoding(self) -> bool {
        matches!(self, ModelKind::QuadraticSvm | ModelKind::Knn | ModelKind::LogisticRegression)
    }
}

/// A model kind, overrides of its hyperparameter defaults, and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hyperparams {
    Tree(TreeParams),
    Boosted(BoostParams),
    Svm(SvmParams),
    Knn { k: usize },
    GaussianNb { var_floor: f64 },
    Logistic(LogisticParams),
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> ModelSpec {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Defaults with overrides applied, each override range-checked.
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        let allowed = self.kind.allowed_params();
        if let Some(bad) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter {bad:?} for {} (allowed: {})", self.kind, allowed.join(", "))));
        }
        let real = |key: &str, default: f64, ok: fn(f64) -> bool| -> Result<f64> {
            match self.params.get(key) {
                None => Ok(default),
                Some(&v) if v.is_finite() && ok(v) => Ok(v),
                Some(v) => Err(Error::Config(format!("{} parameter {key} = {v} is out of range", self.kind))),
            }
        };
        let int = |key: &str, default: usize, min: usize| -> Result<usize> {
            match self.params.get(key) {
                None => Ok(default),
                Some(&v) if v.fract() == 0.0 && v >= min as f64 && v < 1e12 => Ok(v as usize),
                Some(v) => Err(Error::Config(format!("{} parameter {key} = {v} must be an integer >= {min}", self.kind))),
            }
        };
        let tree = |default_splits: usize| -> Result<TreeParams> {
            Ok(TreeParams {
                max_splits: int("max_splits", default_splits, 1)?,
                min_parent_size: int("min_parent_size", TreeParams::default().min_parent_size, 2)?,
                max_depth: match self.params.get("max_depth") {
                    None => None,
                    Some(_) => Some(int("max_depth", 0, 1)?),
                },
            })
        };
        Ok(match self.kind {
            ModelKind::DecisionTree => Hyperparams::Tree(tree(100)?),
            ModelKind::CoarseTree => Hyperparams::Tree(tree(4)?),
            ModelKind::BoostedTrees => {
                let d = BoostParams::default();
                Hyperparams::Boosted(BoostParams {
                    n_learners: int("n_learners", d.n_learners, 1)?,
                    learning_rate: real("learning_rate", d.learning_rate, |v| v > 0.0 && v <= 1.0)?,
                    tree: TreeParams {
                        max_splits: int("max_splits", d.tree.max_splits, 1)?,
                        min_parent_size: int("min_parent_size", d.tree.min_parent_size, 2)?,
                        max_depth: None,
                    },
                })
            }
            ModelKind::QuadraticSvm => {
                let d = SvmParams::default();
                Hyperparams::Svm(SvmParams {
                    box_constraint: real("box_constraint", d.box_constraint, |v| v > 0.0)?,
                    tolerance: real("tolerance", d.tolerance, |v| v > 0.0)?,
                    max_iter: int("max_iter", d.max_iter, 0)?,
                    cache_mb: int("cache_mb", d.cache_mb, 0)?,
                })
            }
            ModelKind::Knn => Hyperparams::Knn { k: int("k", 10, 1)? },
            ModelKind::GaussianNb => Hyperparams::GaussianNb {
                var_floor: real("var_floor", 1e-9, |v| v > 0.0)?,
            },
            ModelKind::LogisticRegression => {
                let d = LogisticParams::default();
                Hyperparams::Logistic(LogisticParams {
                    lambda: real("lambda", d.lambda, |v| v >= 0.0)?,
                    grad_tol: real("grad_tol", d.grad_tol, |v| v > 0.0)?,
                    max_iter: int("max_iter", d.max_iter, 1)?,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fitted<T> {
    Tree(DecisionTree<T>),
    Boosted(BoostedTrees<T>),
    Svm(QuadraticSvm<T>),
    Knn(Knn<T>),
    GaussianNb(GaussianNb),
    Logistic(LogisticRegression),
}

/// A fitted classifier with the preprocessing needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub spec: ModelSpec,
    pub schema: Schema,
    pub standardizer: Option<Standardizer<T>>,
    pub fitted: Fitted<T>,
}

fn level_counts(schema: &Schema) -> Vec<usize> {
    schema.columns.iter().map(|c| c.levels.as_ref().map_or(0, Vec::len)).collect()
}

fn check_finite<T: Scalar>(features: &[RawFeature<T>], schema: &Schema) -> Result<()> {
    for (f, c) in features.iter().zip(&schema.columns) {
        if let RawFeature::Num(v) = f {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("column {:?} has non-finite values", c.name)));
            }
        }
    }
    Ok(())
}

pub fn train_model<T: Scalar>(train: &FeatureMatrix<T>, spec: &ModelSpec) -> Result<TrainedModel<T>> {
    let hp = spec.hyperparams()?;
    if train.is_empty() {
        return Err(Error::EmptyFeatureMatrix);
    }
    if train.columns.is_empty() {
        return Err(Error::Invalid("training matrix has no feature columns".into()));
    }
    if train.class_counts().contains(&0) {
        return Err(Error::SingleClass);
    }
    let schema = Schema::of(train);
    let features = schema.gather(train)?;
    check_finite(&features, &schema)?;
    let y = train.classes();
    let levels = level_counts(&schema);
    let standardizer = spec.kind.uses_dense_encoding().then(|| Standardizer::fit(&features));
    let dense = || encode::encode_dense(&schema, &features, standardizer.as_ref());
    let fitted = match hp {
        Hyperparams::Tree(p) => Fitted::Tree(DecisionTree::fit(&features, &levels, &y, &vec![1.0; y.len()], &p)),
        Hyperparams::Boosted(p) => Fitted::Boosted(BoostedTrees::fit(&features, &levels, &y, &p)),
        Hyperparams::Svm(p) => Fitted::Svm(QuadraticSvm::fit(&dense(), &y, &p).0),
        Hyperparams::Knn { k } => Fitted::Knn(Knn::fit(dense(), y, k)),
        Hyperparams::GaussianNb { var_floor } => Fitted::GaussianNb(GaussianNb::fit(&features, &levels, &y, var_floor)),
        Hyperparams::Logistic(p) => Fitted::Logistic(LogisticRegression::fit(&dense(), &y, &p)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        schema,
        standardizer,
        fitted,
    })
}

impl<T: Scalar> TrainedModel<T> {
    /// Predicted class per row, 1 for dominant.
    pub fn predict_classes(&self, rows: &FeatureMatrix<T>) -> Result<Vec<usize>> {
        let features = self.schema.gather(rows)?;
        check_finite(&features, &self.schema)?;
        let dense = || encode::encode_dense(&self.schema, &features, self.standardizer.as_ref());
        Ok(match &self.fitted {
            Fitted::Tree(t) => t.predict(&features),
            Fitted::Boosted(b) => b.predict(&features),
            Fitted::Svm(s) => s.predict(&dense()),
            Fitted::Knn(k) => k.predict(&dense()),
            Fitted::GaussianNb(nb) => nb.predict(&features),
            Fitted::Logistic(l) => l.predict(&dense()),
        })
    }
}

pub fn predict<T: Scalar>(model: &TrainedModel<T>, rows: &FeatureMatrix<T>) -> Result<Vec<HandRole>> {
    Ok(model.predict_classes(rows)?.into_iter().map(HandRole::from_class).collect())
}
