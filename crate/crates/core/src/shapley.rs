//! Shapley values of an arbitrary set function.
//!
//! [`exact_shapley`] tabulates the value function on all `2^d` subsets and
//! forms the weighted sum of incremental values. [`mc_shapley`] averages
//! incremental values along uniformly drawn permutations; each permutation
//! telescopes to `nu([d]) - nu(empty)`, so the estimate is efficient exactly.

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Default largest `d` accepted by the exact engine.
pub const DEFAULT_EXACT_CAP: usize = 25;

/// Largest `d` for which the Monte Carlo engine switches to exhaustive
/// enumeration once the budget covers all `d!` orderings.
pub const EXHAUSTIVE_PERMUTATION_CAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    Cheap,
    Expensive,
}

/// A set function `nu` on subsets of `[d]`.
pub trait ValueFunction: Sync {
    fn dim(&self) -> usize;

    fn value(&self, u: &FeatureSet) -> Result<f64>;

    fn cost(&self) -> CostClass {
        CostClass::Cheap
    }

    /// Target observation the function explains, when there is one.
    fn target(&self) -> Option<usize> {
        None
    }

    /// `nu` along the chain `empty, {o_1}, {o_1, o_2}, ..., set(order)`;
    /// returns `order.len() + 1` values.
    fn chain_values(&self, order: &[usize]) -> Result<Vec<f64>> {
        let mut u = FeatureSet::empty(self.dim());
        let mut out = Vec::with_capacity(order.len() + 1);
        out.push(self.value(&u)?);
        for &j in order {
            u.insert(j);
            out.push(self.value(&u)?);
        }
        Ok(out)
    }

    /// `nu` on every subset, indexed by bitmask. Only called for `d < 64`.
    fn table(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        (0..1u64 << d).into_par_iter().map(|mask| self.value(&FeatureSet::from_mask(d, mask))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CsExact,
    CsMc,
    Igcs,
    Gkw,
    Uniqueness,
    Random,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::CsExact, Method::CsMc, Method::Igcs, Method::Gkw, Method::Uniqueness, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::CsExact => "cs-exact",
            Method::CsMc => "cs-mc",
            Method::Igcs => "igcs",
            Method::Gkw => "gkw",
            Method::Uniqueness => "uniqueness",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Per-feature attribution for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub method: Method,
    pub target_index: usize,
    pub values: Vec<f64>,
    pub nu_empty: f64,
    pub nu_full: f64,
    /// `(nu_full - nu_empty) - sum(values)`.
    pub efficiency_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Attribution {
    pub fn new(method: Method, target_index: usize, values: Vec<f64>, nu_empty: f64, nu_full: f64) -> Self {
        let efficiency_gap = (nu_full - nu_empty) - values.iter().sum::<f64>();
        Self {
            method,
            target_index,
            values,
            nu_empty,
            nu_full,
            efficiency_gap,
            stderr: None,
            steps: None,
            samples: None,
            seed: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `s! (d-1-s)! / d!` for `s = 0..d`.
fn subset_weights(d: usize) -> Vec<f64> {
    let mut binom = 1.0f64; // C(d-1, s)
    (0..d)
        .map(|s| {
            if s > 0 {
                binom = binom * (d - s) as f64 / s as f64;
            }
            1.0 / (d as f64 * binom)
        })
        .collect()
}

/// Shapley values from a full table of `nu`, indexed by bitmask.
pub fn shapley_from_table(d: usize, table: &[f64]) -> Vec<f64> {
    assert_eq!(table.len(), 1usize << d, "table must hold 2^d values");
    let weights = subset_weights(d);
    (0..d)
        .into_par_iter()
        .map(|j| {
            let bit = 1usize << j;
            let mut acc = 0.0;
            for mask in (0..table.len()).filter(|m| m & bit == 0) {
                acc += weights[mask.count_ones() as usize] * (table[mask | bit] - table[mask]);
            }
            acc
        })
        .collect()
}

pub fn exact_shapley(nu: &dyn ValueFunction) -> Result<Attribution> {
    exact_shapley_with_cap(nu, DEFAULT_EXACT_CAP)
}

pub fn exact_shapley_with_cap(nu: &dyn ValueFunction, cap: usize) -> Result<Attribution> {
    let d = nu.dim();
    if d > cap.min(63) {
        return Err(Error::DimensionTooLarge { d, cap });
    }
    let table = nu.table()?;
    let values = shapley_from_table(d, &table);
    Ok(Attribution::new(Method::CsExact, nu.target().unwrap_or(0), values, table[0], table[table.len() - 1]))
}

/// Uniform random permutation of `0..d` by Fisher-Yates.
pub fn random_permutation<R: Rng>(d: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Generator for sample `index` of a seeded run: one ChaCha8 stream per sample.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self { sum: vec![0.0; d], sumsq: vec![0.0; d] }
    }

    fn add_permutation(&mut self, nu: &dyn ValueFunction, perm: &[usize]) -> Result<()> {
        let chain = nu.chain_values(perm)?;
        for (k, &j) in perm.iter().enumerate() {
            let inc = chain[k + 1] - chain[k];
            self.sum[j] += inc;
            self.sumsq[j] += inc * inc;
        }
        Ok(())
    }

    fn merge(mut self, other: &Moments) -> Self {
        for j in 0..self.sum.len() {
            self.sum[j] += other.sum[j];
            self.sumsq[j] += other.sumsq[j];
        }
        self
    }
}

/// Permutation-sampling estimate from `samples` orderings.
///
/// Permutation `k` is drawn from [`sample_rng`]`(seed, k)`, and partial sums
/// are combined in a fixed order, so the output depends only on the inputs.
/// When `samples >= d!` and `d <= 6`, every ordering is enumerated once instead.
pub fn mc_shapley(nu: &dyn ValueFunction, samples: usize, seed: u64) -> Result<Attribution> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let d = nu.dim();
    let d_factorial = (1..=d).try_fold(1usize, |acc, k| acc.checked_mul(k));
    let exhaustive = d <= EXHAUSTIVE_PERMUTATION_CAP && d_factorial.is_some_and(|f| samples >= f);

    let (moments, m) = if exhaustive {
        use itertools::Itertools;
        let mut moments = Moments::new(d);
        let mut m = 0;
        for perm in (0..d).permutations(d) {
            moments.add_permutation(nu, &perm)?;
            m += 1;
        }
        (moments, m)
    } else {
        let chunk = samples.div_ceil(1024).max(16);
        let partials: Vec<Moments> = (0..samples.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut moments = Moments::new(d);
                for k in c * chunk..((c + 1) * chunk).min(samples) {
                    let perm = random_permutation(d, &mut sample_rng(seed, k as u64));
                    moments.add_permutation(nu, &perm)?;
                }
                Ok(moments)
            })
            .collect::<Result<_>>()?;
        let total = partials.iter().fold(Moments::new(d), Moments::merge);
        (total, samples)
    };

    let mf = m as f64;
    let values: Vec<f64> = moments.sum.iter().map(|s| s / mf).collect();
    let stderr = (m > 1).then(|| {
        values
            .iter()
            .zip(&moments.sumsq)
            .map(|(mean, sq)| ((sq / mf - mean * mean).max(0.0) * mf / (mf - 1.0) / mf).sqrt())
            .collect()
    });
    let nu_empty = nu.value(&FeatureSet::empty(d))?;
    let nu_full = nu.value(&FeatureSet::full(d))?;
    let mut attr = Attribution::new(Method::CsMc, nu.target().unwrap_or(0), values, nu_empty, nu_full);
    attr.stderr = stderr;
    attr.samples = Some(m);
    attr.seed = Some(seed);
    Ok(attr)
}

/// Value function given by an explicit table over bitmasks.
#[derive(Debug, Clone)]
pub struct TableValue {
    d: usize,
    table: Vec<f64>,
}

impl TableValue {
    pub fn new(d: usize, table: Vec<f64>) -> Result<Self> {
        if d >= 64 || table.len() != 1usize << d {
            return Err(Error::DimensionMismatch { expected: 1usize << d.min(63), found: table.len() });
        }
        Ok(Self { d, table })
    }

    pub fn from_fn(d: usize, f: impl Fn(u64) -> f64) -> Self {
        Self { d, table: (0..1u64 << d).map(f).collect() }
    }
}

impl ValueFunction for TableValue {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, u: &FeatureSet) -> Result<f64> {
        let mask = u.to_mask().ok_or(Error::DimensionTooLarge { d: u.dim(), cap: 63 })?;
        Ok(self.table[mask as usize])
    }

    fn table(&self) -> Result<Vec<f64>> {
        Ok(self.table.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_player() -> TableValue {
        TableValue::new(2, vec![0.0, 1.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn weights_sum_to_one_per_coordinate() {
        for d in 1..12 {
            let w = subset_weights(d);
            let total: f64 = (0..d).map(|s| w[s] * binom(d - 1, s)).sum();
            assert!((total - 1.0).abs() < 1e-13, "d={d}");
        }
    }

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn two_player_game() {
        let a = exact_shapley(&two_player()).unwrap();
        assert_eq!(a.values, vec![1.5, 2.5]);
        assert_eq!(a.efficiency_gap, 0.0);
    }

    #[test]
    fn constant_game_is_all_zero() {
        let a = exact_shapley(&TableValue::from_fn(4, |_| 3.0)).unwrap();
        assert_eq!(a.values, vec![0.0; 4]);
    }

    #[test]
    fn cap_enforced() {
        let big = TableValue::from_fn(5, |m| m as f64);
        assert!(matches!(exact_shapley_with_cap(&big, 4), Err(Error::DimensionTooLarge { d: 5, cap: 4 })));
    }

    #[test]
    fn single_permutation_increments() {
        let nu = two_player();
        let chain = nu.chain_values(&[0, 1]).unwrap();
        assert_eq!(chain, vec![0.0, 1.0, 4.0]);
        let mut m = Moments::new(2);
        m.add_permutation(&nu, &[0, 1]).unwrap();
        assert_eq!(m.sum, vec![1.0, 3.0]);
    }

    #[test]
    fn exhaustive_switch_matches_exact() {
        let nu = TableValue::from_fn(4, |m| ((m * 37 + 11) % 17) as f64 / 3.0);
        let exact = exact_shapley(&nu).unwrap();
        let mc = mc_shapley(&nu, 24, 9).unwrap();
        assert_eq!(mc.samples, Some(24));
        for (a, b) in exact.values.iter().zip(&mc.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_is_seed_deterministic_and_efficient() {
        let nu = TableValue::from_fn(8, |m| (m as f64).sqrt() - (m % 5) as f64);
        let a = mc_shapley(&nu, 100, 42).unwrap();
        let b = mc_shapley(&nu, 100, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.efficiency_gap.abs() < 1e-12);
        assert!(a.stderr.as_ref().unwrap().iter().all(|s| s.is_finite()));
        let c = mc_shapley(&nu, 100, 43).unwrap();
        assert_ne!(a.values, c.values);
        assert!(mc_shapley(&nu, 1, 0).unwrap().stderr.is_none());
        assert!(mc_shapley(&nu, 0, 0).is_err());
    }

    #[test]
    fn fisher_yates_is_a_permutation() {
        let mut rng = sample_rng(7, 3);
        let mut p = random_permutation(50, &mut rng);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("shap".parse::<Method>().is_err());
    }
}
