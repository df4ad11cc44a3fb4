#[path = "support/oracles.rs"]
mod oracles;

use abductor_core::eval::{match_beats, wilcoxon_signed_rank};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn exact_wilcoxon_matches_enumeration() {
    let mut rng = oracles::seeded(7);
    for case in 0..100 {
        let n = rng.random_range(1..=12);
        let diffs: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-6i32..=6)) / 4.0).collect();
        let want = oracles::wilcoxon_enumerated(&diffs);
        let got = wilcoxon_signed_rank(&diffs);
        assert!((want - got).abs() < 1e-12, "case {case}: {diffs:?} {want} {got}");
    }
    assert_eq!(wilcoxon_signed_rank(&[0.01; 8]), 0.0078125);
}

#[test]
fn uniformly_improved_records_are_significant() {
    let diffs: Vec<f64> = (1..=18).map(|i| 0.001 * i as f64).collect();
    assert!(wilcoxon_signed_rank(&diffs) < 0.05);
}

fn sorted_times() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..5000, 0..25).prop_map(|mut v| {
        v.sort_unstable();
        v
    })
}

proptest! {
    #[test]
    fn matching_is_maximum_and_symmetric(test in sorted_times(), reference in sorted_times(), tol in 0i64..300) {
        let a = match_beats(&test, &reference, tol);
        let b = match_beats(&reference, &test, tol);
        prop_assert_eq!(a.tp, oracles::max_matching(&test, &reference, tol));
        prop_assert_eq!(a.tp, b.tp);
        prop_assert_eq!(a.fp, b.fn_);
        prop_assert_eq!(a.fn_, b.fp);
    }

    #[test]
    fn removing_a_false_positive_never_lowers_f1(reference in sorted_times(), extra in 0i64..5000) {
        let tol = 150;
        prop_assume!(reference.iter().all(|r| (r - extra).abs() > 2 * tol));
        let mut with = reference.clone();
        with.push(extra);
        with.sort_unstable();
        prop_assert!(match_beats(&reference, &reference, tol).f1() >= match_beats(&with, &reference, tol).f1());
    }
}
