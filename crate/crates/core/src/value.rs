//! Model-free value functions built on observed data only.
//!
//! * [`CohortValue`]: mean response over the cohort `C_u`.
//! * [`UniquenessValue`]: `-log2 |C_u|`.
//! * [`GkwValue`]: Gaussian-kernel weighted mean response, weights from a
//!   scaled Mahalanobis distance to the target on the features in `u`.

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::shapley::{CostClass, ValueFunction};
use crate::similarity::SimilarityProfile;
use nalgebra::{DMatrix, DVector};
use parking_lot::Mutex;
use std::collections::HashMap;
use std::sync::Arc;

/// Running `(count, sum)` over a cohort, with the sum kept compensated so
/// long add/remove sequences do not drift.
#[derive(Debug, Clone, Copy, Default)]
struct CohortTally {
    count: usize,
    sum: f64,
    carry: f64,
}

impl CohortTally {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Cohort sizes and response sums shared by the cohort-based value functions.
#[derive(Debug, Clone, Copy)]
struct Cohorts<'a> {
    profile: &'a SimilarityProfile,
    responses: &'a [f64],
}

impl Cohorts<'_> {
    /// Sum is accumulated in row order, matching a direct weighted sum.
    fn stats(&self, u: &FeatureSet) -> (usize, f64) {
        let mut count = 0;
        let mut sum = 0.0;
        for (set, &f) in self.profile.dissim_sets().iter().zip(self.responses) {
            if set.is_disjoint(u) {
                count += 1;
                sum += f;
            }
        }
        (count, sum)
    }

    /// Cohort along a chain, refined by filtering an explicit index list.
    fn chain(&self, order: &[usize]) -> Vec<(usize, f64)> {
        let sets = self.profile.dissim_sets();
        let mut members: Vec<usize> = (0..self.profile.n()).collect();
        let sum_of = |m: &[usize]| m.iter().map(|&i| self.responses[i]).sum::<f64>();
        let mut out = Vec::with_capacity(order.len() + 1);
        out.push((members.len(), sum_of(&members)));
        for &j in order {
            let before = members.len();
            members.retain(|&i| !sets[i].contains(j));
            let last = out.last().copied().unwrap();
            out.push(if members.len() == before { last } else { (members.len(), sum_of(&members)) });
        }
        out
    }

    /// All `2^d` cohorts, visited in Gray-code order so each step toggles one
    /// feature and only touches the rows dissimilar on it.
    fn table(&self) -> Vec<(usize, f64)> {
        let d = self.profile.d();
        let n = self.profile.n();
        let by_feature = self.profile.rows_by_feature();
        let mut hits = vec![0u32; n];
        let mut tally = CohortTally::default();
        for &f in self.responses {
            tally.add(f);
            tally.count += 1;
        }
        let mut out = vec![(0usize, 0.0f64); 1 << d];
        out[0] = (tally.count, tally.total());
        let mut gray = 0usize;
        for step in 1usize..1 << d {
            let j = step.trailing_zeros() as usize;
            gray ^= 1 << j;
            let entering = gray >> j & 1 == 1;
            for &i in &by_feature[j] {
                if entering {
                    hits[i] += 1;
                    if hits[i] == 1 {
                        tally.count -= 1;
                        tally.add(-self.responses[i]);
                    }
                } else {
                    hits[i] -= 1;
                    if hits[i] == 0 {
                        tally.count += 1;
                        tally.add(self.responses[i]);
                    }
                }
            }
            out[gray] = (tally.count, tally.total());
        }
        out
    }
}

fn check_dims(profile: &SimilarityProfile, responses: &[f64]) -> Result<()> {
    if profile.n() != responses.len() {
        return Err(Error::DimensionMismatch { expected: profile.n(), found: responses.len() });
    }
    Ok(())
}

/// Cohort mean of the responses: `nu(u) = mean { f_i : i in C_u }`.
#[derive(Debug, Clone, Copy)]
pub struct CohortValue<'a> {
    cohorts: Cohorts<'a>,
}

impl<'a> CohortValue<'a> {
    pub fn new(profile: &'a SimilarityProfile, responses: &'a [f64]) -> Result<Self> {
        check_dims(profile, responses)?;
        Ok(Self { cohorts: Cohorts { profile, responses } })
    }

    pub fn profile(&self) -> &'a SimilarityProfile {
        self.cohorts.profile
    }

    pub fn responses(&self) -> &'a [f64] {
        self.cohorts.responses
    }
}

impl ValueFunction for CohortValue<'_> {
    fn dim(&self) -> usize {
        self.cohorts.profile.d()
    }

    fn target(&self) -> Option<usize> {
        Some(self.cohorts.profile.target())
    }

    fn value(&self, u: &FeatureSet) -> Result<f64> {
        let (count, sum) = self.cohorts.stats(u);
        Ok(sum / count as f64)
    }

    fn chain_values(&self, order: &[usize]) -> Result<Vec<f64>> {
        Ok(self.cohorts.chain(order).into_iter().map(|(c, s)| s / c as f64).collect())
    }

    fn table(&self) -> Result<Vec<f64>> {
        Ok(self.cohorts.table().into_iter().map(|(c, s)| s / c as f64).collect())
    }
}

/// `nu(u) = -log2 |C_u|`.
#[derive(Debug, Clone, Copy)]
pub struct UniquenessValue<'a> {
    cohorts: Cohorts<'a>,
}

impl<'a> UniquenessValue<'a> {
    pub fn new(profile: &'a SimilarityProfile) -> Self {
        Self { cohorts: Cohorts { profile, responses: &[] } }
    }

    fn size(&self, u: &FeatureSet) -> usize {
        self.cohorts.profile.dissim_sets().iter().filter(|s| s.is_disjoint(u)).count()
    }
}

impl ValueFunction for UniquenessValue<'_> {
    fn dim(&self) -> usize {
        self.cohorts.profile.d()
    }

    fn target(&self) -> Option<usize> {
        Some(self.cohorts.profile.target())
    }

    fn value(&self, u: &FeatureSet) -> Result<f64> {
        Ok(-(self.size(u) as f64).log2())
    }

    fn table(&self) -> Result<Vec<f64>> {
        // Responses are irrelevant here; zeros give the sizes.
        let zeros = vec![0.0; self.cohorts.profile.n()];
        let cohorts = Cohorts { profile: self.cohorts.profile, responses: &zeros };
        Ok(cohorts.table().into_iter().map(|(c, _)| -(c as f64).log2()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkwParams {
    /// Kernel bandwidth on standardized features.
    pub sigma: f64,
    /// Ridge `lambda`; `lambda * trace(cov) / d` is added to the diagonal.
    pub ridge: f64,
}

impl GkwParams {
    pub const DEFAULT_SIGMA: f64 = 0.1;
    pub const DEFAULT_RIDGE: f64 = 1e-6;
}

impl Default for GkwParams {
    fn default() -> Self {
        Self { sigma: Self::DEFAULT_SIGMA, ridge: Self::DEFAULT_RIDGE }
    }
}

const GKW_CACHE_LIMIT: usize = 1 << 14;

/// Empirical Gaussian kernel weighted mean of observed responses.
///
/// For `u` nonempty, row `i` gets weight `exp(-D_u^2 / (2 sigma^2))` with
/// `D_u^2 = (x_iu - x_tu)' inv(Sigma_uu) (x_iu - x_tu) / |u|`; `nu(empty)` is
/// the grand mean.
pub struct GkwValue {
    /// Row-major standardized features.
    x: Vec<Vec<f64>>,
    responses: Vec<f64>,
    cov: DMatrix<f64>,
    sigma: f64,
    target: usize,
    /// Lower Cholesky factors of `Sigma_uu`, keyed by `u`.
    factors: Mutex<HashMap<FeatureSet, Arc<DMatrix<f64>>>>,
}

impl GkwValue {
    pub fn new(ds: &Dataset, target: usize, params: GkwParams) -> Result<Self> {
        let n = ds.n();
        let d = ds.d();
        if target >= n {
            return Err(Error::TargetOutOfRange { target, n });
        }
        if !(params.sigma > 0.0 && params.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", params.sigma)));
        }
        if !(params.ridge >= 0.0 && params.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {}", params.ridge)));
        }
        let mut cols = Vec::with_capacity(d);
        for (col, name) in ds.columns().iter().zip(ds.column_names()) {
            match col {
                Column::Numeric(v) => cols.push(standardize(v)),
                Column::Categorical { .. } => return Err(Error::CategoricalFeatureUnsupported(name.clone())),
            }
        }
        let x: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let denom = (n.max(2) - 1) as f64;
        let mut cov =
            DMatrix::from_fn(d, d, |a, b| cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum::<f64>() / denom);
        let shift = params.ridge * cov.trace() / d as f64;
        for j in 0..d {
            cov[(j, j)] += shift;
        }
        Ok(Self {
            x,
            responses: ds.responses().to_vec(),
            cov,
            sigma: params.sigma,
            target,
            factors: Mutex::new(HashMap::new()),
        })
    }

    fn factor(&self, u: &FeatureSet, idx: &[usize]) -> Result<Arc<DMatrix<f64>>> {
        if let Some(l) = self.factors.lock().get(u) {
            return Ok(Arc::clone(l));
        }
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]);
        let l = Arc::new(nalgebra::Cholesky::new(sub).ok_or(Error::SingularCovariance)?.unpack());
        let mut cache = self.factors.lock();
        if cache.len() < GKW_CACHE_LIMIT {
            cache.insert(u.clone(), Arc::clone(&l));
        }
        Ok(l)
    }

    /// Kernel weight of every row for subset `u`.
    pub fn weights(&self, u: &FeatureSet) -> Result<Vec<f64>> {
        if u.dim() != self.cov.nrows() {
            return Err(Error::DimensionMismatch { expected: self.cov.nrows(), found: u.dim() });
        }
        if u.is_empty() {
            return Ok(vec![1.0; self.x.len()]);
        }
        let idx: Vec<usize> = u.iter().collect();
        let l = self.factor(u, &idx)?;
        let xt = &self.x[self.target];
        let scale = 2.0 * self.sigma * self.sigma * idx.len() as f64;
        Ok(self
            .x
            .iter()
            .map(|xi| {
                let diff = DVector::from_iterator(idx.len(), idx.iter().map(|&j| xi[j] - xt[j]));
                let y = l.solve_lower_triangular(&diff).expect("Cholesky factor has a positive diagonal");
                (-y.norm_squared() / scale).exp()
            })
            .collect())
    }
}

/// Centers a column and scales it to unit sample variance; constant
/// columns are only centered.
fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let sd = var.sqrt();
    v.iter().map(|x| if sd > 0.0 { (x - mean) / sd } else { x - mean }).collect()
}

impl ValueFunction for GkwValue {
    fn dim(&self) -> usize {
        self.cov.nrows()
    }

    fn cost(&self) -> CostClass {
        CostClass::Expensive
    }

    fn target(&self) -> Option<usize> {
        Some(self.target)
    }

    fn value(&self, u: &FeatureSet) -> Result<f64> {
        let w = self.weights(u)?;
        let num: f64 = w.iter().zip(&self.responses).map(|(w, f)| w * f).sum();
        Ok(num / w.iter().sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SimilaritySpec;
    use crate::shapley::exact_shapley;

    fn d3() -> (Dataset, SimilarityProfile) {
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0]).unwrap();
        let p = SimilarityProfile::build(&ds, &SimilaritySpec::equality(&ds), 0).unwrap();
        (ds, p)
    }

    fn set(d: usize, idx: &[usize]) -> FeatureSet {
        FeatureSet::from_indices(d, idx.iter().copied())
    }

    #[test]
    fn d3_cohort_means() {
        let (ds, p) = d3();
        let nu = CohortValue::new(&p, ds.responses()).unwrap();
        assert_eq!(nu.value(&set(2, &[])).unwrap(), 2.0);
        assert_eq!(nu.value(&set(2, &[0])).unwrap(), 1.5);
        assert_eq!(nu.value(&set(2, &[1])).unwrap(), 1.0);
        assert_eq!(nu.value(&set(2, &[0, 1])).unwrap(), 1.0);
        assert_eq!(nu.table().unwrap(), vec![2.0, 1.5, 1.0, 1.0]);
        assert_eq!(nu.chain_values(&[1, 0]).unwrap(), vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn d3_cohort_shapley() {
        let (ds, p) = d3();
        let a = exact_shapley(&CohortValue::new(&p, ds.responses()).unwrap()).unwrap();
        assert_eq!(a.values, vec![-0.25, -0.75]);
        assert_eq!(a.target_index, 0);
    }

    #[test]
    fn d3_uniqueness() {
        let (_, p) = d3();
        let nu = UniquenessValue::new(&p);
        assert!((nu.value(&set(2, &[])).unwrap() + 3f64.log2()).abs() < 1e-15);
        assert_eq!(nu.value(&set(2, &[0])).unwrap(), -1.0);
        assert_eq!(nu.value(&set(2, &[1])).unwrap(), 0.0);
        assert_eq!(nu.value(&set(2, &[0, 1])).unwrap(), 0.0);
        let a = exact_shapley(&nu).unwrap();
        // phi_1 = (nu{1} - nu{} + nu{1,2} - nu{2}) / 2, phi_2 by efficiency.
        let l3 = 3f64.log2();
        assert!((a.values[0] - (l3 - 1.0) / 2.0).abs() < 1e-12);
        assert!((a.values[1] - (l3 + 1.0) / 2.0).abs() < 1e-12);
        assert!((a.values[0] - 0.29248).abs() < 1e-5 && (a.values[1] - 1.29248).abs() < 1e-5);
    }

    #[test]
    fn response_length_checked() {
        let (_, p) = d3();
        assert!(CohortValue::new(&p, &[1.0]).is_err());
    }

    #[test]
    fn gkw_univariate_weights() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 2.0]).unwrap();
        let g = GkwValue::new(&ds, 0, GkwParams::default()).unwrap();
        let w = g.weights(&set(1, &[0])).unwrap();
        assert_eq!(w[0], 1.0);
        assert!((w[1] / (-50.0f64).exp() - 1.0).abs() < 1e-3);
        assert!((w[2] / (-200.0f64).exp() - 1.0).abs() < 1e-3);
        let v = g.value(&set(1, &[0])).unwrap();
        assert!(v > 0.0 && v < 1e-21, "{v}");
        assert_eq!(g.value(&set(1, &[])).unwrap(), 1.0);
    }

    #[test]
    fn gkw_rejects_categorical_and_bad_sigma() {
        let ds = Dataset::new(vec![Column::categorical(&["a", "b"])], vec!["c".into()], vec![0.0, 1.0]).unwrap();
        assert!(matches!(GkwValue::new(&ds, 0, GkwParams::default()), Err(Error::CategoricalFeatureUnsupported(_))));
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        assert!(GkwValue::new(&ds, 0, GkwParams { sigma: 0.0, ridge: 0.0 }).is_err());
    }

    #[test]
    fn gkw_singular_without_ridge() {
        // Two identical columns: Sigma_uu is singular for u = {0, 1}.
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0]], vec![0.0, 1.0, 2.0]).unwrap();
        let g = GkwValue::new(&ds, 0, GkwParams { sigma: 1.0, ridge: 0.0 }).unwrap();
        assert!(matches!(g.value(&set(2, &[0, 1])), Err(Error::SingularCovariance)));
        let g = GkwValue::new(&ds, 0, GkwParams { sigma: 1.0, ridge: 1e-6 }).unwrap();
        assert!(g.value(&set(2, &[0, 1])).unwrap().is_finite());
    }
}
