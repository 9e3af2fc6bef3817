//! Independent oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use cohort_shapley::data::{Column, Dataset, SimilaritySpec};
use cohort_shapley::similarity::SimilarityProfile;
use cohort_shapley::FeatureSet;
use itertools::Itertools;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn d3() -> Dataset {
    Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0]).unwrap()
}

/// Small-integer features so that equality cohorts are nontrivial.
pub fn random_dataset(rng: &mut impl Rng, n: usize, d: usize, levels: u32) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..levels) as f64).collect()).collect();
    let y = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

pub fn equality_profile(ds: &Dataset, t: usize) -> SimilarityProfile {
    SimilarityProfile::build(ds, &SimilaritySpec::equality(ds), t).unwrap()
}

/// Random profile with each `j in J_i` independently with probability `p`.
pub fn random_profile(rng: &mut impl Rng, n: usize, d: usize, p: f64) -> SimilarityProfile {
    let t = rng.gen_range(0..n);
    let sets = (0..n)
        .map(|i| {
            if i == t {
                FeatureSet::empty(d)
            } else {
                FeatureSet::from_indices(d, (0..d).filter(|_| rng.gen::<f64>() < p))
            }
        })
        .collect();
    SimilarityProfile::from_dissim_sets(t, d, sets).unwrap()
}

/// Cohort mean computed straight from the feature table, no profile.
pub fn naive_cohort_mean(ds: &Dataset, t: usize, u: &[usize]) -> f64 {
    let value = |i: usize, j: usize| match ds.column(j) {
        Column::Numeric(v) => v[i],
        Column::Categorical { codes, .. } => codes[i] as f64,
    };
    let members: Vec<usize> = (0..ds.n()).filter(|&i| u.iter().all(|&j| value(i, j) == value(t, j))).collect();
    members.iter().map(|&i| ds.responses()[i]).sum::<f64>() / members.len() as f64
}

/// Shapley values as the average over all `d!` orderings of incremental values.
pub fn permutation_average(d: usize, nu: impl Fn(&[usize]) -> f64) -> Vec<f64> {
    let mut phi = vec![0.0; d];
    let mut count = 0.0;
    for perm in (0..d).permutations(d) {
        let mut prev = nu(&[]);
        for k in 0..d {
            let mut prefix = perm[..=k].to_vec();
            prefix.sort_unstable();
            let cur = nu(&prefix);
            phi[perm[k]] += cur - prev;
            prev = cur;
        }
        count += 1.0;
    }
    phi.iter().map(|p| p / count).collect()
}

pub fn mask_members(d: usize, mask: u64) -> Vec<usize> {
    (0..d).filter(|j| mask >> j & 1 == 1).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Central finite-difference gradient.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|k| {
            let mut up = z.to_vec();
            let mut down = z.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Random multilinear polynomial `sum_u c_u prod_{j in u} z_j` as (terms, coefficients).
pub struct Multilinear {
    pub d: usize,
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl Multilinear {
    pub fn random(rng: &mut impl Rng, d: usize, n_terms: usize) -> Self {
        let terms = (0..n_terms)
            .map(|_| {
                let mask = rng.gen_range(0..1u64 << d);
                (mask_members(d, mask), rng.gen_range(-2.0..2.0))
            })
            .collect();
        Self { d, terms }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|(u, c)| c * u.iter().map(|&j| z[j]).product::<f64>()).sum()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for (u, c) in &self.terms {
            for &k in u {
                g[k] += c * u.iter().filter(|&&j| j != k).map(|&j| z[j]).product::<f64>();
            }
        }
        g
    }

    pub fn corner(&self, mask: u64) -> f64 {
        let z: Vec<f64> = (0..self.d).map(|j| (mask >> j & 1) as f64).collect();
        self.value(&z)
    }
}
