//! Integrated-gradient cohort Shapley (IGCS).
//!
//! The cohort mean is extended from the corners of `{0,1}^d` to the whole cube
//! by the soft similarity `s_z(x_i) = prod_{j in J_i} (1 - z_j)`:
//!
//! ```text
//! nu(z) = sum_i f_i s_z(x_i) / sum_i s_z(x_i)
//! ```
//!
//! IGCS integrates `grad nu` along the main diagonal `z = alpha * 1` with an
//! `R`-node midpoint rule. On the diagonal `s_z(x_i) = (1 - alpha)^{|J_i|}`, so
//! one node costs `O(sum_i |J_i|)` and the whole attribution `O(nRd)`.
//!
//! The target row has `J_t` empty and contributes 1 to the denominator, which
//! keeps `nu` smooth on the closed cube.

use crate::error::{Error, Result};
use crate::shapley::{Attribution, Method};
use crate::similarity::{check_unit_point, SimilarityProfile};
use rayon::prelude::*;

/// Midpoint rule with `steps` nodes on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    steps: usize,
}

impl QuadratureSpec {
    pub const DEFAULT_STEPS: usize = 50;

    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one step".into()));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Node `r` (0-based): `(2r + 1) / (2R)`.
    pub fn node(&self, r: usize) -> f64 {
        (2 * r + 1) as f64 / (2 * self.steps) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|r| self.node(r))
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { steps: Self::DEFAULT_STEPS }
    }
}

/// Sums `term(r)` over `r in 0..count` as a fixed binary tree, so the result
/// does not depend on how rayon schedules the halves.
pub(crate) fn tree_sum<F>(count: usize, dim: usize, term: &F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    fn go<F: Fn(usize) -> Vec<f64> + Sync>(lo: usize, hi: usize, dim: usize, term: &F) -> Vec<f64> {
        match hi - lo {
            0 => vec![0.0; dim],
            1 => term(lo),
            len => {
                let mid = lo + len / 2;
                let (mut a, b) = rayon::join(|| go(lo, mid, dim, term), || go(mid, hi, dim, term));
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            }
        }
    }
    go(0, count, dim, term)
}

/// Sums along the diagonal at one `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSums {
    /// Soft cardinality `sum_i (1-alpha)^{|J_i|}`.
    pub denominator: f64,
    /// Soft total `sum_i f_i (1-alpha)^{|J_i|}`.
    pub numerator: f64,
    /// `D_k = sum_i s^(k)`: `-sum_{i: k in J_i} (1-alpha)^{|J_i|-1}`.
    pub d_sums: Vec<f64>,
    /// `A_k = sum_i f_i s^(k)`.
    pub a_sums: Vec<f64>,
}

impl DiagonalSums {
    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }

    pub fn gradient(&self) -> Vec<f64> {
        let b = self.denominator;
        let c = self.numerator;
        self.a_sums.iter().zip(&self.d_sums).map(|(a, d)| (a * b - c * d) / (b * b)).collect()
    }
}

/// The soft cohort value `nu(z)` for one target.
#[derive(Debug, Clone)]
pub struct SoftValue<'a> {
    profile: &'a SimilarityProfile,
    responses: &'a [f64],
    /// Row indices grouped by `|J_i|`, one group per distinct count.
    buckets: Vec<(usize, Vec<usize>)>,
}

impl<'a> SoftValue<'a> {
    pub fn new(profile: &'a SimilarityProfile, responses: &'a [f64]) -> Result<Self> {
        if profile.n() != responses.len() {
            return Err(Error::DimensionMismatch { expected: profile.n(), found: responses.len() });
        }
        let mut by_count: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &c) in profile.dissim_counts().iter().enumerate() {
            by_count.entry(c).or_default().push(i);
        }
        Ok(Self { profile, responses, buckets: by_count.into_iter().collect() })
    }

    pub fn dim(&self) -> usize {
        self.profile.d()
    }

    pub fn profile(&self) -> &'a SimilarityProfile {
        self.profile
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let s = self.profile.soft_similarity(z)?;
        let num: f64 = s.iter().zip(self.responses).map(|(s, f)| s * f).sum();
        Ok(num / s.iter().sum::<f64>())
    }

    /// Exact gradient of `nu` at `z` by the quotient rule.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_unit_point(z, self.dim())?;
        let d = self.dim();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut a_sums = vec![0.0; d];
        let mut d_sums = vec![0.0; d];
        let mut members = Vec::new();
        let mut prefix = Vec::new();
        for (set, &f) in self.profile.dissim_sets().iter().zip(self.responses) {
            members.clear();
            members.extend(set.iter());
            // prefix[k] = prod of the first k factors; the suffix product is
            // folded in on the way back so zero factors need no division.
            prefix.clear();
            prefix.push(1.0);
            for &j in &members {
                let last = *prefix.last().unwrap();
                prefix.push(last * (1.0 - z[j]));
            }
            let s = *prefix.last().unwrap();
            num += f * s;
            den += s;
            let mut suffix = 1.0;
            for (k, &j) in members.iter().enumerate().rev() {
                let without = prefix[k] * suffix;
                d_sums[j] -= without;
                a_sums[j] -= f * without;
                suffix *= 1.0 - z[j];
            }
        }
        let sums = DiagonalSums { denominator: den, numerator: num, d_sums, a_sums };
        Ok(sums.gradient())
    }

    /// Denominator, numerator and per-feature derivative sums at `alpha * 1`.
    pub fn diagonal_sums(&self, alpha: f64) -> Result<DiagonalSums> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::ZOutOfRange { index: 0, value: alpha });
        }
        let d = self.dim();
        let base = 1.0 - alpha;
        let mut sums = DiagonalSums { denominator: 0.0, numerator: 0.0, d_sums: vec![0.0; d], a_sums: vec![0.0; d] };
        let sets = self.profile.dissim_sets();
        for (count, rows) in &self.buckets {
            let power = base.powi(*count as i32);
            for &i in rows {
                sums.denominator += power;
                sums.numerator += self.responses[i] * power;
            }
            if *count == 0 {
                continue;
            }
            let lower = base.powi(*count as i32 - 1);
            if lower == 0.0 {
                continue;
            }
            for &i in rows {
                let fw = self.responses[i] * lower;
                for k in sets[i].iter() {
                    sums.d_sums[k] -= lower;
                    sums.a_sums[k] -= fw;
                }
            }
        }
        Ok(sums)
    }

    /// Gradient at `alpha * 1` through [`Self::diagonal_sums`].
    pub fn diagonal_gradient(&self, alpha: f64) -> Result<Vec<f64>> {
        Ok(self.diagonal_sums(alpha)?.gradient())
    }

    /// IGCS attribution with the midpoint rule.
    ///
    /// `efficiency_gap` is whatever the quadrature leaves over; it is
    /// reported as-is rather than renormalized away.
    pub fn attribution(&self, quad: &QuadratureSpec) -> Result<Attribution> {
        let d = self.dim();
        let r = quad.steps();
        let total =
            tree_sum(r, d, &|k| self.diagonal_gradient(quad.node(k)).expect("midpoint nodes lie inside [0, 1]"));
        let values = total.iter().map(|v| v / r as f64).collect();
        let nu_empty = self.diagonal_sums(0.0)?.value();
        let nu_full = self.diagonal_sums(1.0)?.value();
        let mut attr = Attribution::new(Method::Igcs, self.profile.target(), values, nu_empty, nu_full);
        attr.steps = Some(r);
        Ok(attr)
    }
}

/// A scalar function on `[0,1]^d` that can be integrated along the diagonal.
pub trait PathFunction: Sync {
    fn dim(&self) -> usize;

    fn value(&self, z: &[f64]) -> f64;

    /// Exact gradient, when available.
    fn gradient(&self, _z: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl PathFunction for SoftValue<'_> {
    fn dim(&self) -> usize {
        SoftValue::dim(self)
    }

    fn value(&self, z: &[f64]) -> f64 {
        SoftValue::value(self, z).expect("path points lie inside the unit cube")
    }

    fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        Some(SoftValue::gradient(self, z).expect("path points lie inside the unit cube"))
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// [`PathFunction`] from closures.
pub struct FnPath {
    dim: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
}

impl FnPath {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, value: Box::new(value), gradient: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }
}

impl PathFunction for FnPath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(z))
    }
}

/// Diagonal-path integrated gradients of `g` from `0` to `1`.
///
/// Uses the midpoint rule on the exact gradient when `g` has one, otherwise
/// [`ig_finite_difference`] with the same number of steps.
pub fn ig_of_function(g: &dyn PathFunction, quad: &QuadratureSpec) -> Vec<f64> {
    let d = g.dim();
    if g.gradient(&vec![0.5; d]).is_none() {
        return ig_finite_difference(g, quad.steps());
    }
    let r = quad.steps();
    let total = tree_sum(r, d, &|k| g.gradient(&vec![quad.node(k); d]).expect("gradient was available"));
    total.into_iter().map(|v| v / r as f64).collect()
}

/// Gradient-free path estimate:
/// `psi_j = sum_{r<R} g(r/R * 1 + e_j / R) - g(r/R * 1)`.
pub fn ig_finite_difference(g: &dyn PathFunction, steps: usize) -> Vec<f64> {
    let d = g.dim();
    let rf = steps as f64;
    tree_sum(steps, d, &|r| {
        let base = vec![r as f64 / rf; d];
        let g0 = g.value(&base);
        (0..d)
            .map(|j| {
                let mut z = base.clone();
                z[j] = (r + 1) as f64 / rf;
                g.value(&z) - g0
            })
            .collect()
    })
}

/// IGCS for several targets, in target order.
pub fn igcs_many(profiles: &[SimilarityProfile], responses: &[f64], quad: &QuadratureSpec) -> Result<Vec<Attribution>> {
    profiles.par_iter().map(|p| SoftValue::new(p, responses)?.attribution(quad)).collect()
}
