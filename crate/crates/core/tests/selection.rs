mod common;

use approx::assert_abs_diff_eq;
use common::{brute_force_mrmr, direct_entropy, direct_mi, labeled_matrix, random_token_matrix, token_columns};
use domhand::matrix::Column;
use domhand::selection::{
    context_filter, discretize, entropy, mrmr_rank, mutual_information, BinStrategy, ContextFilterRules, DiscretizationSpec, MrmrScheme,
};
use domhand::{Error, Vocabulary};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn pair_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (1usize..80).prop_flat_map(|n| (prop::collection::vec(0u32..6, n), prop::collection::vec(0u32..6, n)))
}

proptest! {
    #[test]
    fn mi_is_symmetric((x, y) in pair_strategy()) {
        let a = mutual_information(&x, &y).unwrap();
        let b = mutual_information(&y, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn mi_is_bounded_by_marginal_entropies((x, y) in pair_strategy()) {
        let mi = mutual_information(&x, &y).unwrap();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= entropy(&x).min(entropy(&y)) + 1e-12);
    }

    #[test]
    fn mi_matches_direct_formula((x, y) in pair_strategy()) {
        let mi = mutual_information(&x, &y).unwrap();
        prop_assert!((mi - direct_mi(&x, &y)).abs() <= 1e-12);
        prop_assert!((entropy(&x) - direct_entropy(&x)).abs() <= 1e-12);
    }

    #[test]
    fn mrmr_matches_brute_force(seed in any::<u64>(), m in 1usize..=8, n in 2usize..=64, mid in any::<bool>()) {
        let scheme = if mid { MrmrScheme::Mid } else { MrmrScheme::Miq };
        let (cols, label) = random_token_matrix(seed, m, n);
        let fm = labeled_matrix(&label, token_columns(&cols));
        let ranking = mrmr_rank(&fm, scheme, &DiscretizationSpec::default()).unwrap();
        prop_assert_eq!(ranking.names(), brute_force_mrmr(&cols, &label, scheme));
    }

    #[test]
    fn ranking_invariant_under_monotone_transforms(seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let label: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..n).map(|i| (rng.random_range(0..200) + 40 * j * label[i]) as f64).collect())
            .collect();
        let build = |f: &dyn Fn(f64) -> f64| {
            let columns = cols
                .iter()
                .enumerate()
                .map(|(j, v)| Column::numeric(format!("x{j}"), v.iter().map(|&x| f(x)).collect()))
                .collect();
            labeled_matrix(&label, columns)
        };
        let spec = DiscretizationSpec::default();
        let base = mrmr_rank(&build(&|x| x), MrmrScheme::Miq, &spec).unwrap();
        let cubed = mrmr_rank(&build(&|x| x * x * x + 5.0), MrmrScheme::Miq, &spec).unwrap();
        let exped = mrmr_rank(&build(&|x| (x / 100.0).exp()), MrmrScheme::Miq, &spec).unwrap();
        prop_assert_eq!(&base, &cubed);
        prop_assert_eq!(base.names(), exped.names());
    }
}

#[test]
fn mi_of_two_by_two_counts() {
    // joint counts {(0,0):2, (0,1):1, (1,0):1, (1,1):4}
    let x = [0, 0, 0, 1, 1, 1, 1, 1];
    let y = [0, 0, 1, 0, 1, 1, 1, 1];
    let expected = 0.25 * (16.0f64 / 9.0).log2() + 2.0 * 0.125 * (8.0f64 / 15.0).log2() + 0.5 * (32.0f64 / 25.0).log2();
    let mi = mutual_information(&x, &y).unwrap();
    assert_abs_diff_eq!(mi, expected, epsilon = 1e-12);
    assert_abs_diff_eq!(mi, 0.158868, epsilon = 1e-6);
}

#[test]
fn second_copy_of_top_feature_ranks_below_weak_independent_feature() {
    let label: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
    // top agrees with the label except on rows 0 and 10
    let top: Vec<String> = (0..20).map(|i| if i == 0 || i == 10 { 1 - label[i] } else { label[i] }).map(|v| v.to_string()).collect();
    // weak: V = 0.067 and W = MI(weak, top) = 0.067, so its score is 1.0
    // against 0.531 / 1.0 for the copy
    let weak: Vec<String> = [1, 0, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 1, 1].iter().map(|v: &u8| v.to_string()).collect();
    let cols = vec![("top".to_string(), top.clone()), ("top_copy".to_string(), top), ("weak".to_string(), weak)];
    let fm = labeled_matrix(&label, token_columns(&cols));
    let ranking = mrmr_rank(&fm, MrmrScheme::Miq, &DiscretizationSpec::default()).unwrap();
    assert_eq!(ranking.names(), vec!["top", "weak", "top_copy"]);
    assert_eq!(ranking.names(), brute_force_mrmr(&cols, &label, MrmrScheme::Miq));
    assert!(ranking.entries[1].relevance > 0.0);
    assert!(ranking.entries[1].relevance < ranking.entries[2].relevance);
}

#[test]
fn biased_feature_ranks_first_with_dominant_score() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n = 2000;
    let label: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut columns: Vec<Column<f64>> = (0..6)
        .map(|j| Column::numeric(format!("noise{j}"), (0..n).map(|_| rng.random::<f64>()).collect()))
        .collect();
    let biased: Vec<f64> = label.iter().map(|&y| y as f64 + 0.3 * rng.random::<f64>()).collect();
    columns.push(Column::numeric("biased", biased));
    let fm = labeled_matrix(&label, columns);
    let r = mrmr_rank(&fm, MrmrScheme::Miq, &DiscretizationSpec::default()).unwrap();
    assert_eq!(r.entries[0].name, "biased");
    let others = r.entries[1..].iter().map(|e| e.relevance).fold(0.0, f64::max);
    assert!(r.entries[0].relevance >= 50.0 * others, "relevance ratio {}", r.entries[0].relevance / others);
    assert!(r.entries[0].score > r.entries[1].score);
}

#[test]
fn ranking_lists_every_feature_once_and_starts_at_relevance_argmax() {
    for seed in 0..20 {
        let (cols, label) = random_token_matrix(seed, 8, 50);
        let fm = labeled_matrix(&label, token_columns(&cols));
        let r = mrmr_rank(&fm, MrmrScheme::Miq, &DiscretizationSpec::default()).unwrap();
        let mut names = r.names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 8);
        let best = r.entries.iter().map(|e| e.relevance).fold(0.0, f64::max);
        assert_eq!(r.entries[0].relevance, best);
    }
}

#[test]
fn discretization_examples() {
    let q2 = DiscretizationSpec { bins: 2, strategy: BinStrategy::Quantile };
    let w2 = DiscretizationSpec { bins: 2, strategy: BinStrategy::EqualWidth };
    assert_eq!(discretize(&[1.0, 2.0, 3.0, 4.0], &q2).unwrap(), vec![0, 0, 1, 1]);
    assert_eq!(discretize(&[5.0; 7], &q2).unwrap(), vec![0; 7]);
    assert_eq!(discretize(&[0.0, 0.0, 0.0, 100.0], &w2).unwrap(), vec![0, 0, 0, 1]);
}

#[test]
fn empty_matrix_cannot_be_ranked() {
    let fm = labeled_matrix(&[1], vec![Column::numeric("x", vec![1.0])]);
    assert!(matches!(mrmr_rank(&fm, MrmrScheme::Miq, &DiscretizationSpec::default()), Err(Error::EmptyFeatureMatrix)));
}

/// Six windows, two rows each: activity per window, per-row steps.
fn filter_fixture(activities: &[&str], steps: &[f64]) -> domhand::FeatureMatrix64 {
    let n = activities.len() * 2;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let act: Vec<&str> = (0..n).map(|i| activities[i / 2]).collect();
    labeled_matrix(
        &labels,
        vec![
            Column::numeric("steps_cumsum", steps.to_vec()),
            Column::numeric("calories_cumsum", vec![1.5; n]),
            Column::categorical("activity", &act),
        ],
    )
}

fn activities_of(fm: &domhand::FeatureMatrix64) -> Vec<String> {
    let c = fm.column("activity").unwrap();
    (0..fm.n_rows()).map(|i| c.token(i).unwrap().to_string()).collect()
}

#[test]
fn default_rules_drop_sleep_and_zero_counts() {
    let fm = filter_fixture(
        &["sleeping", "walking", "movies", "exercising", "meeting", "walking"],
        &[3.0, 4.0, 5.0, 6.0, 1.0, 1.0, 9.0, 9.0, 2.0, 2.0, 0.0, 8.0],
    );
    let out = context_filter(&fm, &ContextFilterRules::default()).unwrap();
    // the last walking window has one zero-step hand, so both rows go
    assert_eq!(activities_of(&out.matrix), vec!["walking", "walking", "exercising", "exercising"]);
    assert_eq!(out.dropped, 8);
    let ids: Vec<usize> = out.matrix.meta.iter().map(|m| m.window_id).collect();
    assert_eq!(ids, vec![1, 1, 3, 3]);
}

#[test]
fn whitelist_keeps_only_listed_activity() {
    let fm = filter_fixture(&["exercising", "walking", "exercising"], &[1.0; 6]);
    let out = context_filter(&fm, &ContextFilterRules::none().with_whitelist(&["exercising"])).unwrap();
    assert_eq!(activities_of(&out.matrix), vec!["exercising"; 4]);
}

#[test]
fn filter_rejects_bad_rules_and_empty_results() {
    let vocab = Vocabulary::default();
    let mut rules = ContextFilterRules::default().with_whitelist(&["sleeping"]);
    assert!(rules.validate(&vocab).is_err());
    rules.activity_whitelist = Some(vec!["juggling".into()]);
    assert!(matches!(rules.validate(&vocab), Err(Error::UnknownToken { .. })));
    let fm = filter_fixture(&["sleeping"], &[1.0, 1.0]);
    assert!(matches!(context_filter(&fm, &ContextFilterRules::default()), Err(Error::EmptyAfterFilter)));
}

const ACTS: [&str; 5] = ["sleeping", "walking", "exercising", "meeting", "chores"];

proptest! {
    #[test]
    fn filter_conserves_rows_and_is_idempotent(
        acts in prop::collection::vec(0usize..ACTS.len(), 1..30),
        zero_mask in prop::collection::vec(any::<bool>(), 60),
        whitelist in any::<bool>(),
    ) {
        let names: Vec<&str> = acts.iter().map(|&a| ACTS[a]).collect();
        let steps: Vec<f64> = (0..names.len() * 2).map(|i| if zero_mask[i] { 0.0 } else { 3.0 }).collect();
        let fm = filter_fixture(&names, &steps);
        let mut rules = ContextFilterRules::default();
        if whitelist {
            rules = rules.with_whitelist(&["walking", "chores"]);
        }
        match context_filter(&fm, &rules) {
            Ok(once) => {
                prop_assert_eq!(once.matrix.n_rows() + once.dropped, fm.n_rows());
                let twice = context_filter(&once.matrix, &rules).unwrap();
                prop_assert_eq!(twice.dropped, 0);
                prop_assert_eq!(&twice.matrix, &once.matrix);
                // windows survive whole
                for pair in once.matrix.meta.chunks(2) {
                    prop_assert_eq!(pair[0].window_id, pair[1].window_id);
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::EmptyAfterFilter)),
        }
    }
}
