mod common;

use cohort_shapley::diagnostics::{corner_convergence, heps_mass, second_order_weights, PairTerm};
use cohort_shapley::igcs::{ig_of_function, QuadratureSpec};
use cohort_shapley::FeatureSet;
use common::*;
use rand::Rng;

fn nonempty_set(r: &mut impl Rng, d: usize, p: f64) -> FeatureSet {
    loop {
        let s = FeatureSet::from_indices(d, (0..d).filter(|_| r.gen::<f64>() < p));
        if !s.is_empty() {
            return s;
        }
    }
}

#[test]
fn pair_weights_sum_to_one_and_match_path_integral() {
    let mut r = rng(1);
    let q = QuadratureSpec::new(10_000).unwrap();
    for _ in 0..30 {
        let d = r.gen_range(1..24);
        let a = nonempty_set(&mut r, d, 0.4);
        let b = nonempty_set(&mut r, d, 0.4);
        let (cs, ig) = second_order_weights(&a, &b).unwrap();
        let union = a.union(&b);
        assert!((cs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((ig.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((0..d).all(|j| union.contains(j) || (cs[j] == 0.0 && ig[j] == 0.0)));
        let psi = ig_of_function(&PairTerm::new(&a, &b), &q);
        for j in 0..d {
            assert!((psi[j] + ig[j]).abs() <= 1e-6);
        }
    }
}

#[test]
fn corner_fraction_within_bound() {
    let mut r = rng(2);
    for _ in 0..30 {
        let d = r.gen_range(1..=14);
        let n = r.gen_range(1..40);
        let density = r.gen_range(0.2..0.9);
        let p = random_profile(&mut r, n, d, density);
        let c = corner_convergence(&p).unwrap();
        assert!(c.within_bound && c.fraction <= c.bound);
        // Brute force count.
        let inside = (0..1u64 << d)
            .filter(|&m| {
                let u = FeatureSet::from_mask(d, m);
                (0..n).any(|i| i != p.target() && p.dissim_set(i).is_disjoint(&u))
            })
            .count() as u64;
        assert_eq!(c.inside, inside);
    }
}

#[test]
fn zero_point_is_always_inside() {
    // Every sample is inside when eps is tiny relative to the mass at z = 0.
    let mut r = rng(3);
    let p = random_profile(&mut r, 30, 4, 0.3);
    let rep = heps_mass(&p, 1e-12, 200, 1).unwrap();
    assert!(rep.mc_mass_estimate > 0.9);
    assert_eq!(rep.corner_fraction.map(|f| f > 0.0), Some(true));
}
