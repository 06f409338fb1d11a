//! Row filtering by spatiotemporal context.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::UNKNOWN_CONTEXT;
use crate::matrix::{ColumnData, FeatureMatrix};
use crate::scalar::Scalar;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextFilterRules {
    pub excluded_activities: Vec<String>,
    /// Numeric columns that must be non-zero on every row of a window.
    pub require_nonzero: Vec<String>,
    /// When set, only these activities survive.
    pub activity_whitelist: Option<Vec<String>>,
}

impl Default for ContextFilterRules {
    fn default() -> Self {
        ContextFilterRules {
            excluded_activities: vec!["sleeping".into(), "movies".into(), "meeting".into()],
            require_nonzero: vec!["steps_cumsum".into(), "calories_cumsum".into()],
            activity_whitelist: None,
        }
    }
}

impl ContextFilterRules {
    pub fn none() -> Self {
        ContextFilterRules {
            excluded_activities: Vec::new(),
            require_nonzero: Vec::new(),
            activity_whitelist: None,
        }
    }

    pub fn with_whitelist(mut self, activities: &[&str]) -> Self {
        self.activity_whitelist = Some(activities.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let known = |a: &str| a == UNKNOWN_CONTEXT || vocab.has_activity(a);
        let whitelist = self.activity_whitelist.as_deref().unwrap_or(&[]);
        for a in self.excluded_activities.iter().chain(whitelist) {
            if !known(a) {
                return Err(Error::UnknownToken {
                    kind: "activity",
                    token: a.clone(),
                });
            }
        }
        if let Some(a) = whitelist.iter().find(|a| self.excluded_activities.contains(a)) {
            return Err(Error::Config(format!("activity {a:?} is both whitelisted and excluded")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<T> {
    pub matrix: FeatureMatrix<T>,
    pub dropped: usize,
}

/// Drops windows whose context makes the hands indistinguishable. A window's
/// rows are kept or dropped together.
pub fn context_filter<T: Scalar>(matrix: &FeatureMatrix<T>, rules: &ContextFilterRules) -> Result<FilterOutcome<T>> {
    let activity = matrix
        .column("activity")
        .ok_or_else(|| Error::SchemaMismatch {
            missing: vec!["activity".into()],
            extra: vec![],
        })?;
    let mut nonzero = Vec::new();
    for name in &rules.require_nonzero {
        match matrix.column(name).map(|c| &c.data) {
            Some(ColumnData::Numeric(v)) => nonzero.push(v),
            Some(_) => return Err(Error::Invalid(format!("column {name:?} is not numeric"))),
            None => {
                return Err(Error::SchemaMismatch {
                    missing: vec![name.clone()],
                    extra: vec![],
                })
            }
        }
    }
    let row_ok = |i: usize| {
        let act = activity.token(i).unwrap_or(UNKNOWN_CONTEXT);
        if rules.excluded_activities.iter().any(|a| a == act) {
            return false;
        }
        if let Some(w) = &rules.activity_whitelist {
            if !w.iter().any(|a| a == act) {
                return false;
            }
        }
        nonzero.iter().all(|col| col[i] != T::zero())
    };
    let failing: BTreeSet<usize> = (0..matrix.n_rows())
        .filter(|&i| !row_ok(i))
        .map(|i| matrix.meta[i].window_id)
        .collect();
    let keep: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| !failing.contains(&matrix.meta[i].window_id))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(FilterOutcome {
        dropped: matrix.n_rows() - keep.len(),
        matrix: matrix.take_rows(&keep),
    })
}
