//! CART classification trees (Gini, best-first growth) and AdaBoost ensembles.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::encode::{RawFeature, UNSEEN};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_splits: usize,
    pub min_parent_size: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_splits: 100,
            min_parent_size: 2,
            max_depth: None,
        }
    }
}

/// Weighted Gini mass `W (1 - p0^2 - p1^2)` of a class-weight pair.
pub fn gini_mass(w: [f64; 2]) -> f64 {
    let t = w[0] + w[1];
    if t <= 0.0 {
        0.0
    } else {
        t - (w[0] * w[0] + w[1] * w[1]) / t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rule<T> {
    /// `x <= threshold` goes left.
    Le(T),
    /// Levels flagged true go left; unseen levels follow `unseen_left`.
    In { left: Vec<bool>, unseen_left: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf { class: usize, weights: [f64; 2] },
    Split { feature: usize, rule: Rule<T>, left: usize, right: usize },
}

/// Total Gini mass of the tree's leaves before and after one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub node: usize,
    pub impurity_before: f64,
    pub impurity_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
    /// Splits in the order they were made.
    pub splits: Vec<SplitRecord>,
}

struct Candidate<T> {
    gain: f64,
    feature: usize,
    rule: Rule<T>,
}

struct Pending<T> {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    best: Option<Candidate<T>>,
}

fn class_weights(rows: &[usize], y: &[usize], w: &[f64]) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for &r in rows {
        acc[y[r]] += w[r];
    }
    acc
}

fn best_numeric<T: Scalar>(values: &[T], rows: &[usize], y: &[usize], w: &[f64], total: [f64; 2]) -> Option<(f64, T)> {
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let parent = gini_mass(total);
    let mut left = [0.0; 2];
    let mut best: Option<(f64, T)> = None;
    for k in 0..order.len() - 1 {
        let r = order[k];
        left[y[r]] += w[r];
        let (a, b) = (values[r], values[order[k + 1]]);
        if a == b {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let gain = parent - gini_mass(left) - gini_mass(right);
        if best.is_none_or(|(g, _)| gain > g) {
            let mid = a + (b - a) / T::of(2.0);
            best = Some((gain, if mid < b { mid } else { a }));
        }
    }
    best
}

/// Optimal two-class subset split: order levels by their class-1 share and
/// scan prefixes.
fn best_categorical(codes: &[u32], n_levels: usize, rows: &[usize], y: &[usize], w: &[f64], total: [f64; 2]) -> Option<(f64, Vec<bool>, bool)> {
    let mut per_level = vec![[0.0f64; 2]; n_levels];
    let mut present = vec![false; n_levels];
    for &r in rows {
        let c = codes[r];
        if c != UNSEEN {
            per_level[c as usize][y[r]] += w[r];
            present[c as usize] = true;
        }
    }
    let mut levels: Vec<usize> = (0..n_levels).filter(|&l| present[l]).collect();
    if levels.len() < 2 {
        return None;
    }
    let share = |l: usize| {
        let t = per_level[l][0] + per_level[l][1];
        if t > 0.0 {
            per_level[l][1] / t
        } else {
            0.0
        }
    };
    levels.sort_by(|&a, &b| share(a).partial_cmp(&share(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let parent = gini_mass(total);
    let mut left = [0.0; 2];
    let mut best: Option<(f64, usize, [f64; 2])> = None;
    for k in 0..levels.len() - 1 {
        let l = levels[k];
        left[0] += per_level[l][0];
        left[1] += per_level[l][1];
        let right = [total[0] - left[0], total[1] - left[1]];
        let gain = parent - gini_mass(left) - gini_mass(right);
        if best.is_none_or(|(g, _, _)| gain > g) {
            best = Some((gain, k, left));
        }
    }
    let (gain, cut, left_w) = best?;
    let mut mask = vec![false; n_levels];
    for &l in &levels[..=cut] {
        mask[l] = true;
    }
    // levels absent from this node follow the heavier side
    let unseen_left = left_w[0] + left_w[1] >= (total[0] + total[1]) / 2.0;
    for l in 0..n_levels {
        if !present[l] {
            mask[l] = unseen_left;
        }
    }
    Some((gain, mask, unseen_left))
}

fn goes_left<T: Scalar>(feature: &RawFeature<T>, rule: &Rule<T>, row: usize) -> bool {
    match (feature, rule) {
        (RawFeature::Num(v), Rule::Le(t)) => v[row] <= *t,
        (RawFeature::Cat(c), Rule::In { left, unseen_left }) => {
            let code = c[row];
            if code == UNSEEN || code as usize >= left.len() {
                *unseen_left
            } else {
                left[code as usize]
            }
        }
        _ => panic!("rule does not match feature kind"),
    }
}

impl<T: Scalar> DecisionTree<T> {
    /// Grows a tree on weighted rows. `n_levels[j]` is the level count of
    /// categorical feature `j` (ignored for numeric ones).
    pub fn fit(features: &[RawFeature<T>], n_levels: &[usize], y: &[usize], w: &[f64], params: &TreeParams) -> DecisionTree<T> {
        let n = y.len();
        let rows: Vec<usize> = (0..n).filter(|&r| w[r] > 0.0).collect();
        let total = class_weights(&rows, y, w);
        let mut tree = DecisionTree {
            nodes: vec![Self::leaf_node(total)],
            splits: Vec::new(),
        };
        let mut impurity = gini_mass(total);
        let scale = total[0] + total[1];

        let search = |rows: &[usize], depth: usize| -> Option<Candidate<T>> {
            if rows.len() < params.min_parent_size.max(2) || params.max_depth.is_some_and(|d| depth >= d) {
                return None;
            }
            let tw = class_weights(rows, y, w);
            if gini_mass(tw) <= 0.0 {
                return None;
            }
            let mut best: Option<Candidate<T>> = None;
            for (j, f) in features.iter().enumerate() {
                let found = match f {
                    RawFeature::Num(v) => best_numeric(v, rows, y, w, tw).map(|(g, t)| (g, Rule::Le(t))),
                    RawFeature::Cat(c) => best_categorical(c, n_levels[j], rows, y, w, tw)
                        .map(|(g, left, unseen_left)| (g, Rule::In { left, unseen_left })),
                };
                if let Some((gain, rule)) = found {
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate { gain, feature: j, rule });
                    }
                }
            }
            // a split must strictly reduce impurity, beyond rounding noise
            best.filter(|b| b.gain > 1e-12 * scale)
        };

        let mut pending = vec![Pending {
            node: 0,
            best: search(&rows, 0),
            rows,
            depth: 0,
        }];
        while tree.splits.len() < params.max_splits {
            let pick = pending
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.best.as_ref().map(|b| (i, b.gain, p.node)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(b.2.cmp(&a.2)));
            let Some((idx, _, _)) = pick else { break };
            let p = pending.swap_remove(idx);
            let cand = p.best.expect("picked candidates have a split");
            let (lrows, rrows): (Vec<usize>, Vec<usize>) = p.rows.iter().partition(|&&r| goes_left(&features[cand.feature], &cand.rule, r));
            let lw = class_weights(&lrows, y, w);
            let rw = class_weights(&rrows, y, w);
            let before = impurity;
            impurity = impurity - gini_mass(class_weights(&p.rows, y, w)) + gini_mass(lw) + gini_mass(rw);
            let left = tree.nodes.len();
            tree.nodes.push(Self::leaf_node(lw));
            tree.nodes.push(Self::leaf_node(rw));
            tree.nodes[p.node] = Node::Split {
                feature: cand.feature,
                rule: cand.rule,
                left,
                right: left + 1,
            };
            tree.splits.push(SplitRecord {
                node: p.node,
                impurity_before: before,
                impurity_after: impurity,
            });
            for (node, rows) in [(left, lrows), (left + 1, rrows)] {
                pending.push(Pending {
                    node,
                    best: search(&rows, p.depth + 1),
                    rows,
                    depth: p.depth + 1,
                });
            }
        }
        tree
    }

    fn leaf_node(weights: [f64; 2]) -> Node<T> {
        Node::Leaf {
            class: usize::from(weights[1] > weights[0]),
            weights,
        }
    }

    pub fn predict_row(&self, features: &[RawFeature<T>], row: usize) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => return *class,
                Node::Split { feature, rule, left, right } => {
                    at = if goes_left(&features[*feature], rule, row) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, features: &[RawFeature<T>]) -> Vec<usize> {
        let n = features.first().map_or(0, RawFeature::len);
        (0..n).map(|r| self.predict_row(features, r)).collect()
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_learners: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_learners: 30,
            learning_rate: 0.1,
            tree: TreeParams {
                max_splits: 20,
                ..TreeParams::default()
            },
        }
    }
}

/// Discrete AdaBoost with shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees<T> {
    pub learners: Vec<(f64, DecisionTree<T>)>,
    /// Weighted training error of each kept learner on its boosted distribution.
    pub learner_errors: Vec<f64>,
    /// True when a learner reached error 0.5 and boosting stopped early.
    pub halted: bool,
    fallback: usize,
}

impl<T: Scalar> BoostedTrees<T> {
    pub fn fit(features: &[RawFeature<T>], n_levels: &[usize], y: &[usize], params: &BoostParams) -> BoostedTrees<T> {
        let n = y.len();
        let mut w = vec![1.0 / n as f64; n];
        let ones = y.iter().filter(|&&c| c == 1).count();
        let mut model = BoostedTrees {
            learners: Vec::new(),
            learner_errors: Vec::new(),
            halted: false,
            fallback: usize::from(2 * ones > n),
        };
        for _ in 0..params.n_learners {
            let tree = DecisionTree::fit(features, n_levels, y, &w, &params.tree);
            let pred = tree.predict(features);
            let total: f64 = w.iter().sum();
            let err: f64 = (0..n).filter(|&i| pred[i] != y[i]).map(|i| w[i]).sum::<f64>() / total;
            if err >= 0.5 {
                model.halted = true;
                break;
            }
            let e = err.max(1e-10);
            let alpha = params.learning_rate * 0.5 * ((1.0 - e) / e).ln();
            for i in 0..n {
                w[i] *= if pred[i] != y[i] { alpha.exp() } else { (-alpha).exp() };
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            model.learners.push((alpha, tree));
            model.learner_errors.push(err);
            if err == 0.0 {
                break;
            }
        }
        model
    }

    pub fn score_row(&self, features: &[RawFeature<T>], row: usize) -> f64 {
        self.learners
            .iter()
            .map(|(a, t)| if t.predict_row(features, row) == 1 { *a } else { -*a })
            .sum()
    }

    pub fn predict(&self, features: &[RawFeature<T>]) -> Vec<usize> {
        let n = features.first().map_or(0, RawFeature::len);
        (0..n)
            .map(|r| {
                let s = self.score_row(features, r);
                if s > 0.0 {
                    1
                } else if s < 0.0 || !self.learners.is_empty() {
                    0
                } else {
                    self.fallback
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(features: &[RawFeature<f64>], y: &[usize], params: TreeParams) -> DecisionTree<f64> {
        let levels: Vec<usize> = features
            .iter()
            .map(|f| match f {
                RawFeature::Cat(c) => c.iter().map(|&v| v as usize + 1).max().unwrap_or(0),
                RawFeature::Num(_) => 0,
            })
            .collect();
        DecisionTree::fit(features, &levels, y, &vec![1.0; y.len()], &params)
    }

    #[test]
    fn gini_of_pure_and_even() {
        assert_eq!(gini_mass([4.0, 0.0]), 0.0);
        assert_eq!(gini_mass([2.0, 2.0]), 2.0);
    }

    #[test]
    fn jittered_xor_fits_exactly() {
        let x1 = RawFeature::Num(vec![0.1, 1.0, 0.05, 0.95]);
        let x2 = RawFeature::Num(vec![0.0, 0.9, 1.0, 0.1]);
        let y = [0, 0, 1, 1];
        let feats = [x1, x2];
        let t = fit(&feats, &y, TreeParams::default());
        assert_eq!(t.predict(&feats), y.to_vec());
        assert!(t.depth() >= 2);
        for s in &t.splits {
            assert!(s.impurity_after < s.impurity_before);
        }
    }

    #[test]
    fn grid_xor_has_no_improving_split() {
        let feats = [RawFeature::Num(vec![0.0, 1.0, 0.0, 1.0]), RawFeature::Num(vec![0.0, 1.0, 1.0, 0.0])];
        let t = fit(&feats, &[0, 0, 1, 1], TreeParams::default());
        assert_eq!(t.n_splits(), 0);
    }

    #[test]
    fn categorical_subset_split() {
        // levels 0 and 2 are class 1, level 1 is class 0
        let feats = [RawFeature::Cat(vec![0, 1, 2, 0, 1, 2])];
        let y = [1, 0, 1, 1, 0, 1];
        let t = fit(&feats, &y, TreeParams::default());
        assert_eq!(t.n_splits(), 1);
        assert_eq!(t.predict(&feats), y.to_vec());
        assert_eq!(t.predict(&[RawFeature::Cat(vec![UNSEEN])]).len(), 1);
    }

    #[test]
    fn max_splits_respected() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<usize> = (0..40).map(|i| (i / 2) % 2).collect();
        let t = fit(&[RawFeature::Num(x)], &y, TreeParams { max_splits: 4, ..TreeParams::default() });
        assert_eq!(t.n_splits(), 4);
    }

    #[test]
    fn boosting_errors_below_half() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 60) as f64).collect();
        let y: Vec<usize> = x.iter().map(|&v| usize::from((v as usize / 7) % 2 == 0)).collect();
        let feats = [RawFeature::Num(x)];
        let m = BoostedTrees::fit(&feats, &[0], &y, &BoostParams::default());
        assert!(!m.learners.is_empty());
        assert!(m.learner_errors.iter().all(|&e| e < 0.5));
        let acc = m.predict(&feats).iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(acc >= 55, "{acc}");
    }
}
