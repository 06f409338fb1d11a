//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::hash::Hash;

use domhand::features::{build_feature_matrix, FeatureOptions, WindowSpec};
use domhand::matrix::{Column, FeatureMatrix, RowMeta};
use domhand::selection::MrmrScheme;
use domhand::synth::{generate_schedule, synthesize_paired_dataset, AsymmetryParams, SynthOptions, SyntheticDataset};
use domhand::timeline::{build_labeled_timeline, TimelineOptions, UniformTimeline};
use domhand::{HandRole, Vocabulary};

pub fn synth(days: u32, seed: u64, params: &AsymmetryParams) -> SyntheticDataset {
    let schedule = generate_schedule(days, seed).unwrap();
    synthesize_paired_dataset(&schedule, params, seed, &SynthOptions::default()).unwrap()
}

pub fn timeline(ds: &SyntheticDataset) -> UniformTimeline {
    build_labeled_timeline(
        &ds.left,
        &ds.right,
        &ds.context,
        ds.dominant,
        ds.device_setting,
        &Vocabulary::default(),
        &TimelineOptions::default(),
    )
    .unwrap()
}

pub fn features(tl: &UniformTimeline, minutes: u32) -> FeatureMatrix<f64> {
    build_feature_matrix(tl, &WindowSpec::minutes(minutes).unwrap(), &FeatureOptions::default()).unwrap()
}

/// Hand-built matrix: paired window metadata, labels overridden by `labels`
/// (1 = dominant).
pub fn labeled_matrix(labels: &[usize], columns: Vec<Column<f64>>) -> FeatureMatrix<f64> {
    let mut meta = RowMeta::paired(labels.len());
    for (m, &y) in meta.iter_mut().zip(labels) {
        m.label = HandRole::from_class(y);
    }
    FeatureMatrix::new(meta, columns).unwrap()
}

fn tally<K: Eq + Hash + Clone>(x: &[K]) -> HashMap<K, f64> {
    let mut m = HashMap::new();
    for k in x {
        *m.entry(k.clone()).or_insert(0.0) += 1.0;
    }
    m
}

/// Plug-in MI in bits, summed straight over the joint table.
pub fn direct_mi<A: Eq + Hash + Clone, B: Eq + Hash + Clone>(x: &[A], y: &[B]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (cx, cy) = (tally(x), tally(y));
    let pairs: Vec<(A, B)> = x.iter().cloned().zip(y.iter().cloned()).collect();
    let joint = tally(&pairs);
    let mi: f64 = joint
        .iter()
        .map(|((a, b), &c)| c / n * (c * n / (cx[a] * cy[b])).log2())
        .sum();
    mi.max(0.0)
}

pub fn direct_entropy<A: Eq + Hash + Clone>(x: &[A]) -> f64 {
    let n = x.len() as f64;
    tally(x).values().map(|&c| -(c / n) * (c / n).log2()).sum()
}

/// Greedy MRMR recomputed from scratch at every step: every candidate's
/// mean redundancy is re-evaluated against the whole selected set, and the
/// winner is the smallest name among scores within the tie tolerance of the
/// maximum.
pub fn brute_force_mrmr(columns: &[(String, Vec<String>)], label: &[usize], scheme: MrmrScheme) -> Vec<String> {
    let relevance: Vec<f64> = columns.iter().map(|(_, v)| direct_mi(v, label)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < columns.len() {
        let scores: Vec<(usize, f64)> = (0..columns.len())
            .filter(|j| !chosen.contains(j))
            .map(|j| {
                if chosen.is_empty() {
                    return (j, relevance[j]);
                }
                let w = chosen.iter().map(|&s| direct_mi(&columns[j].1, &columns[s].1)).sum::<f64>() / chosen.len() as f64;
                let score = match scheme {
                    MrmrScheme::Miq => relevance[j] / w.max(f64::EPSILON),
                    MrmrScheme::Mid => relevance[j] - w,
                };
                (j, score)
            })
            .collect();
        let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * max.abs().max(1.0);
        let winner = scores
            .iter()
            .filter(|s| max - s.1 <= tol)
            .map(|s| s.0)
            .min_by(|&a, &b| columns[a].0.cmp(&columns[b].0))
            .unwrap();
        chosen.push(winner);
    }
    chosen.into_iter().map(|j| columns[j].0.clone()).collect()
}

/// Random categorical matrix from a seed: `m` token columns over a few
/// levels each, plus random labels with both classes present.
pub fn random_token_matrix(seed: u64, m: usize, n: usize) -> (Vec<(String, Vec<String>)>, Vec<usize>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut label: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    label[0] = 0;
    label[1] = 1;
    let columns = (0..m)
        .map(|j| {
            let levels = rng.random_range(1..=5);
            let v = (0..n).map(|i| {
                // some columns lean on the label so relevance varies
                let bias = j % 3 == 0 && rng.random_bool(0.6);
                let level = if bias { label[i] % levels } else { rng.random_range(0..levels) };
                format!("t{level}")
            });
            (format!("f{j}"), v.collect())
        })
        .collect();
    (columns, label)
}

pub fn token_columns(columns: &[(String, Vec<String>)]) -> Vec<Column<f64>> {
    columns.iter().map(|(name, v)| Column::categorical(name.clone(), v)).collect()
}
