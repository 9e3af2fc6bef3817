mod common;

use cohort_shapley::evaluation::{abc_scores, conditional_curves, random_ordering_baseline, AbcReport};
use cohort_shapley::shapley::ValueFunction;
use cohort_shapley::value::CohortValue;
use cohort_shapley::FeatureSet;
use common::*;
use itertools::Itertools;
use rand::Rng;

#[test]
fn zero_sum_over_all_orderings() {
    let mut r = rng(1);
    for _ in 0..20 {
        let n = r.gen_range(2..60);
        let d = r.gen_range(1..=5);
        let ds = random_dataset(&mut r, n, d, 3);
        let p = equality_profile(&ds, r.gen_range(0..n));
        let nu = CohortValue::new(&p, ds.responses()).unwrap();
        let sums: Vec<f64> =
            (0..d).permutations(d).map(|o| AbcReport::for_ordering(&nu, o).unwrap().abc_sum()).collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        assert!(mean.abs() <= 1e-9, "mean {mean}");
    }
}

#[test]
fn d3_exhaustive_orderings_sum_to_zero() {
    let ds = d3();
    let p = equality_profile(&ds, 0);
    let nu = CohortValue::new(&p, ds.responses()).unwrap();
    let a = AbcReport::for_ordering(&nu, vec![0, 1]).unwrap();
    let b = AbcReport::for_ordering(&nu, vec![1, 0]).unwrap();
    assert_eq!((a.abc_sum() + b.abc_sum()) / 2.0, 0.0);
}

#[test]
fn curve_endpoints() {
    let mut r = rng(2);
    let ds = random_dataset(&mut r, 40, 5, 2);
    let p = equality_profile(&ds, 3);
    let nu = CohortValue::new(&p, ds.responses()).unwrap();
    let empty = nu.value(&FeatureSet::empty(5)).unwrap();
    let full = nu.value(&FeatureSet::full(5)).unwrap();
    for o in (0..5).permutations(5) {
        let (ins, del) = conditional_curves(&nu, &o).unwrap();
        assert_eq!((ins[0], ins[5]), (empty, full));
        assert_eq!((del[0], del[5]), (full, empty));
    }
}

#[test]
fn scores_ignore_constant_shift() {
    let mut r = rng(3);
    for _ in 0..10 {
        let ds = random_dataset(&mut r, 30, 4, 2);
        let p = equality_profile(&ds, 0);
        let shifted: Vec<f64> = ds.responses().iter().map(|y| y + 123.25).collect();
        let nu = CohortValue::new(&p, ds.responses()).unwrap();
        let nu2 = CohortValue::new(&p, &shifted).unwrap();
        let a = AbcReport::for_ordering(&nu, vec![2, 0, 3, 1]).unwrap();
        let b = AbcReport::for_ordering(&nu2, vec![2, 0, 3, 1]).unwrap();
        assert!((a.abc_insertion - b.abc_insertion).abs() < 1e-9);
        assert!((a.abc_deletion - b.abc_deletion).abs() < 1e-9);
    }
}

#[test]
fn single_feature_scores_are_zero() {
    let mut r = rng(4);
    let ds = random_dataset(&mut r, 20, 1, 2);
    let p = equality_profile(&ds, 0);
    let nu = CohortValue::new(&p, ds.responses()).unwrap();
    let rep = AbcReport::for_ordering(&nu, vec![0]).unwrap();
    assert_eq!((rep.abc_insertion, rep.abc_deletion), (0.0, 0.0));
    let base = random_ordering_baseline(&nu, 10, 0).unwrap();
    assert_eq!(base.abc_insertion.mean, 0.0);
    assert_eq!(base.abc_deletion.mean, 0.0);
    assert_eq!(abc_scores(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), (0.0, 0.0));
}

#[test]
fn random_baseline_sum_is_statistically_zero() {
    let mut r = rng(5);
    let ds = random_dataset(&mut r, 300, 8, 2);
    let p = equality_profile(&ds, 7);
    let nu = CohortValue::new(&p, ds.responses()).unwrap();
    let base = random_ordering_baseline(&nu, 4000, 9).unwrap();
    assert!(base.abc_sum.mean.abs() <= 3.0 * base.abc_sum.stderr, "{:?}", base.abc_sum);
}
