//! Convergence diagnostics for the soft cohort value and CS/IGCS comparisons.
//!
//! The soft cardinality is `1 + sum_{i != t} prod_{j in J_i} (1 - z_j)`. Its
//! geometric-series expansion converges wherever the non-target mass stays
//! below 1; [`heps_mass`] estimates how much of the cube has mass `>= eps` and
//! reports the analytic bound `n^2 / eps * exp(-floor(a d) / 4)`, where every
//! non-target row has `|J_i| >= a d`. [`corner_convergence`] does the same
//! exactly on the `2^d` corners against the bound `n / 2^{a d}`.

use crate::data::{Dataset, SimilaritySpec};
use crate::error::{Error, Result};
use crate::evaluation::{variable_ordering, AbcReport};
use crate::features::FeatureSet;
use crate::igcs::{PathFunction, QuadratureSpec, SoftValue};
use crate::shapley::{exact_shapley_with_cap, mc_shapley, Attribution, DEFAULT_EXACT_CAP};
use crate::similarity::SimilarityProfile;
use crate::value::CohortValue;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Largest `d` for exhaustive corner enumeration.
pub const CORNER_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundConvention {
    /// No duplicates of the target: `n` counts all non-target rows.
    Standard,
    /// Rows identical to the target are pooled with it; the mass is divided
    /// by their number `n1` and `n`, `a` refer to the remaining rows only.
    DuplicateAdjusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub target_index: usize,
    pub d: usize,
    /// Rows similar to the target on every feature, the target included.
    pub n_identical: usize,
    /// Non-target rows entering the bound.
    pub n_bound: usize,
    /// `min_{i != t} |J_i| / d`; 0 when the target has duplicates.
    pub a: f64,
    /// `min |J_i| / d` over the rows entering the bound.
    pub a_effective: f64,
    /// `max_{i != t} |J_i| / d`.
    pub big_a: f64,
    pub eps: f64,
    pub samples: usize,
    pub mc_mass_estimate: f64,
    pub mc_mass_stderr: f64,
    pub theorem_bound: f64,
    pub corner_fraction: Option<f64>,
    pub corner_bound: Option<f64>,
    pub convention: BoundConvention,
}

struct RowSplit<'a> {
    /// Non-target rows with nonempty `J_i`.
    distinct: Vec<&'a FeatureSet>,
    n_identical: usize,
    min_all: usize,
    max_all: usize,
    min_distinct: usize,
}

fn split_rows(profile: &SimilarityProfile) -> RowSplit<'_> {
    let t = profile.target();
    let mut split =
        RowSplit { distinct: Vec::new(), n_identical: 1, min_all: usize::MAX, max_all: 0, min_distinct: usize::MAX };
    for (i, set) in profile.dissim_sets().iter().enumerate() {
        if i == t {
            continue;
        }
        let c = set.len();
        split.min_all = split.min_all.min(c);
        split.max_all = split.max_all.max(c);
        if c == 0 {
            split.n_identical += 1;
        } else {
            split.distinct.push(set);
            split.min_distinct = split.min_distinct.min(c);
        }
    }
    if split.min_all == usize::MAX {
        split.min_all = 0;
    }
    if split.min_distinct == usize::MAX {
        split.min_distinct = 0;
    }
    split
}

/// `n^2 / eps * exp(-floor(a d) / 4)`, with `floor(a d)` given directly as
/// the smallest dissimilarity count.
pub fn theorem_bound(n: usize, eps: f64, min_count: usize) -> f64 {
    let n = n as f64;
    n * n / eps * (-(min_count as f64) / 4.0).exp()
}

/// Monte Carlo estimate of the share of `[0,1]^d` where the non-target soft
/// mass is at least `eps`, with the analytic bound alongside.
pub fn heps_mass(profile: &SimilarityProfile, eps: f64, samples: usize, seed: u64) -> Result<ConvergenceReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let d = profile.d();
    let split = split_rows(profile);
    let threshold = eps * split.n_identical as f64;
    let hits: usize = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::shapley::sample_rng(seed, k as u64);
            let w: Vec<f64> = (0..d).map(|_| 1.0 - rng.gen::<f64>()).collect();
            let mut mass = 0.0;
            for set in &split.distinct {
                mass += set.iter().map(|j| w[j]).product::<f64>();
                if mass >= threshold {
                    return 1;
                }
            }
            0
        })
        .sum();
    let p = hits as f64 / samples as f64;
    let stderr = (p * (1.0 - p) / samples as f64).sqrt();
    let df = d as f64;
    let convention = if split.n_identical > 1 { BoundConvention::DuplicateAdjusted } else { BoundConvention::Standard };
    let n_bound = split.distinct.len();
    let (corner_fraction, corner_bound) = if d <= CORNER_CAP {
        let c = corner_convergence(profile)?;
        (Some(c.fraction), Some(c.bound))
    } else {
        (None, None)
    };
    Ok(ConvergenceReport {
        target_index: profile.target(),
        d,
        n_identical: split.n_identical,
        n_bound,
        a: split.min_all as f64 / df,
        a_effective: split.min_distinct as f64 / df,
        big_a: split.max_all as f64 / df,
        eps,
        samples,
        mc_mass_estimate: p,
        mc_mass_stderr: stderr,
        theorem_bound: theorem_bound(n_bound, eps, split.min_distinct),
        corner_fraction,
        corner_bound,
        convention,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerReport {
    /// Corners `1_u:0_{-u}` with some non-target row satisfying `u within J_i^c`.
    pub inside: u64,
    pub fraction: f64,
    /// `n / 2^{a d}` over the non-target rows.
    pub bound: f64,
    pub within_bound: bool,
}

/// Exact count of corners with nonzero non-target soft mass.
pub fn corner_convergence(profile: &SimilarityProfile) -> Result<CornerReport> {
    let d = profile.d();
    if d > CORNER_CAP {
        return Err(Error::DimensionTooLarge { d, cap: CORNER_CAP });
    }
    let split = split_rows(profile);
    let full = (1usize << d) - 1;
    // reach[m]: m is a subset of some complement J_i^c; filled downward from
    // the complements one bit at a time.
    let mut reach = vec![false; 1 << d];
    let mut n_rows = 0usize;
    for (i, set) in profile.dissim_sets().iter().enumerate() {
        if i == profile.target() {
            continue;
        }
        n_rows += 1;
        let mask = set.to_mask().expect("d <= 20") as usize;
        reach[full & !mask] = true;
    }
    for bit in 0..d {
        let b = 1usize << bit;
        for m in 0..=full {
            if m & b != 0 && reach[m] {
                reach[m ^ b] = true;
            }
        }
    }
    let inside = reach.iter().filter(|&&r| r).count() as u64;
    let fraction = inside as f64 / (1u64 << d) as f64;
    let bound = n_rows as f64 * 0.5f64.powi(split.min_all as i32);
    Ok(CornerReport { inside, fraction, bound, within_bound: fraction <= bound })
}

/// Second-order weights of the pair term `g(z) = prod_{J_i} (1-z_j) prod_{J_i'} (1-z_j)`,
/// which drops from 1 at `z = 0` to 0 at `z = 1`.
///
/// Returns `(cs, igcs)`. CS spreads the drop evenly over `J_i u J_i'`; IGCS
/// gives `2 / (2|J_i n J_i'| + |J_i ^ J_i'|)` to the intersection and half that
/// to the symmetric difference.
pub fn second_order_weights(ji: &FeatureSet, jip: &FeatureSet) -> Result<(Vec<f64>, Vec<f64>)> {
    if ji.is_empty() || jip.is_empty() {
        return Err(Error::EmptyDissimSet);
    }
    if ji.dim() != jip.dim() {
        return Err(Error::DimensionMismatch { expected: ji.dim(), found: jip.dim() });
    }
    let d = ji.dim();
    let union = ji.union(jip);
    let inter = ji.intersection(jip);
    let sym = ji.symmetric_difference(jip);
    let denom = (2 * inter.len() + sym.len()) as f64;
    let mut cs = vec![0.0; d];
    let mut ig = vec![0.0; d];
    let share = 1.0 / union.len() as f64;
    for j in union.iter() {
        cs[j] = share;
    }
    for j in inter.iter() {
        ig[j] = 2.0 / denom;
    }
    for j in sym.iter() {
        ig[j] = 1.0 / denom;
    }
    Ok((cs, ig))
}

/// The pair term `g_{i,i'}` as an explicit function on the cube.
#[derive(Debug, Clone)]
pub struct PairTerm {
    union: Vec<usize>,
    inter: Vec<usize>,
    d: usize,
}

impl PairTerm {
    pub fn new(ji: &FeatureSet, jip: &FeatureSet) -> Self {
        Self { union: ji.union(jip).iter().collect(), inter: ji.intersection(jip).iter().collect(), d: ji.dim() }
    }

    fn factors(&self) -> impl Iterator<Item = usize> + '_ {
        self.union.iter().chain(&self.inter).copied()
    }
}

impl PathFunction for PairTerm {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.factors().map(|j| 1.0 - z[j]).product()
    }

    fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        let factors: Vec<usize> = self.factors().collect();
        let mut grad = vec![0.0; self.d];
        for (k, &j) in factors.iter().enumerate() {
            let rest: f64 = factors.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &l)| 1.0 - z[l]).product();
            grad[j] -= rest;
        }
        Some(grad)
    }
}

/// Spearman correlation between the rank positions two value vectors induce.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    if d < 2 {
        return 1.0;
    }
    let ranks = |v: &[f64]| {
        let mut r = vec![0usize; d];
        for (pos, j) in variable_ordering(v).into_iter().enumerate() {
            r[j] = pos;
        }
        r
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let sq: f64 = ra.iter().zip(&rb).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    let df = d as f64;
    1.0 - 6.0 * sq / (df * (df * df - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub attribution: Attribution,
    pub abc_insertion: f64,
    pub abc_deletion: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target_index: usize,
    pub cs: MethodRun,
    pub igcs: MethodRun,
    /// `igcs - cs` per feature.
    pub difference: Vec<f64>,
    pub rank_correlation: f64,
}

/// CS (exact when `d` fits the cap, Monte Carlo with `mc_budget` permutations
/// otherwise) against IGCS on one target.
pub fn cs_vs_igcs(
    ds: &Dataset,
    spec: &SimilaritySpec,
    target: usize,
    quad: &QuadratureSpec,
    mc_budget: usize,
    seed: u64,
) -> Result<Comparison> {
    let profile = SimilarityProfile::build(ds, spec, target)?;
    let nu = CohortValue::new(&profile, ds.responses())?;

    let start = Instant::now();
    let cs = if ds.d() <= DEFAULT_EXACT_CAP {
        exact_shapley_with_cap(&nu, DEFAULT_EXACT_CAP)?
    } else {
        mc_shapley(&nu, mc_budget, seed)?
    };
    let cs_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let igcs = SoftValue::new(&profile, ds.responses())?.attribution(quad)?;
    let igcs_seconds = start.elapsed().as_secs_f64();

    let cs_abc = AbcReport::for_attribution(&nu, &cs)?;
    let igcs_abc = AbcReport::for_attribution(&nu, &igcs)?;
    let difference = igcs.values.iter().zip(&cs.values).map(|(a, b)| a - b).collect();
    let rank_correlation = rank_correlation(&cs.values, &igcs.values);
    Ok(Comparison {
        target_index: target,
        difference,
        rank_correlation,
        cs: MethodRun {
            attribution: cs,
            abc_insertion: cs_abc.abc_insertion,
            abc_deletion: cs_abc.abc_deletion,
            seconds: cs_seconds,
        },
        igcs: MethodRun {
            attribution: igcs,
            abc_insertion: igcs_abc.abc_insertion,
            abc_deletion: igcs_abc.abc_deletion,
            seconds: igcs_seconds,
        },
    })
}
