//! Similarity of every observation to a fixed target.
//!
//! For target `t`, observation `i` is similar on feature `j` when the column's
//! [`SimilarityRule`] holds between `x_ij` and `x_tj`. The profile stores only
//! the dissimilarity sets `J_i = { j : not similar }`; cohorts and the soft
//! similarity are derived from them.

use crate::data::{Column, Dataset, SimilarityRule, SimilaritySpec};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityProfile {
    target: usize,
    d: usize,
    dissim: Vec<FeatureSet>,
    counts: Vec<usize>,
}

impl SimilarityProfile {
    pub fn build(ds: &Dataset, spec: &SimilaritySpec, target: usize) -> Result<Self> {
        let n = ds.n();
        let d = ds.d();
        if target >= n {
            return Err(Error::TargetOutOfRange { target, n });
        }
        if spec.rules().len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: spec.rules().len() });
        }
        let ranges = ds.feature_ranges();
        let mut dissim = vec![FeatureSet::empty(d); n];
        for (j, (col, rule)) in ds.columns().iter().zip(spec.rules()).enumerate() {
            match col {
                Column::Numeric(x) => {
                    let xt = x[target];
                    let similar = |xi: f64| match *rule {
                        SimilarityRule::Equality => xi.to_bits() == xt.to_bits(),
                        SimilarityRule::RelativeRange(delta) => (xi - xt).abs() <= delta * ranges[j],
                        SimilarityRule::AbsoluteRange(w) => (xi - xt).abs() <= w,
                    };
                    for (i, &xi) in x.iter().enumerate() {
                        if !similar(xi) {
                            dissim[i].insert(j);
                        }
                    }
                }
                Column::Categorical { codes, .. } => {
                    if *rule != SimilarityRule::Equality {
                        return Err(Error::InvalidSpec(format!(
                            "categorical column `{}` must use equality",
                            ds.column_names()[j]
                        )));
                    }
                    let ct = codes[target];
                    for (i, &c) in codes.iter().enumerate() {
                        if c != ct {
                            dissim[i].insert(j);
                        }
                    }
                }
            }
        }
        Ok(Self::from_parts(target, d, dissim))
    }

    /// Profile from explicit dissimilarity sets. The target's set must be empty.
    pub fn from_dissim_sets(target: usize, d: usize, dissim: Vec<FeatureSet>) -> Result<Self> {
        let n = dissim.len();
        if target >= n {
            return Err(Error::TargetOutOfRange { target, n });
        }
        if let Some(bad) = dissim.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        if !dissim[target].is_empty() {
            return Err(Error::InvalidArgument("the target must be similar to itself on every feature".into()));
        }
        Ok(Self::from_parts(target, d, dissim))
    }

    fn from_parts(target: usize, d: usize, dissim: Vec<FeatureSet>) -> Self {
        let counts = dissim.iter().map(FeatureSet::len).collect();
        Self { target, d, dissim, counts }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn n(&self) -> usize {
        self.dissim.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dissim_set(&self, i: usize) -> &FeatureSet {
        &self.dissim[i]
    }

    pub fn dissim_sets(&self) -> &[FeatureSet] {
        &self.dissim
    }

    pub fn dissim_counts(&self) -> &[usize] {
        &self.counts
    }

    /// `S_j(x_i)`: true when row `i` is similar to the target on feature `j`.
    pub fn indicator(&self, i: usize, j: usize) -> bool {
        !self.dissim[i].contains(j)
    }

    pub fn indicator_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n()).map(|i| (0..self.d).map(|j| self.indicator(i, j) as u8).collect()).collect()
    }

    /// Rows `i` with `j in J_i`, for every feature `j`.
    pub fn rows_by_feature(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.d];
        for (i, set) in self.dissim.iter().enumerate() {
            for j in set.iter() {
                rows[j].push(i);
            }
        }
        rows
    }

    /// Cohort `C_u`: rows similar to the target on every feature of `u`.
    pub fn cohort(&self, u: &FeatureSet) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.dissim[i].is_disjoint(u)).collect()
    }

    /// `s_z(x_i) = prod_{j in J_i} (1 - z_j)` for every row.
    pub fn soft_similarity(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_unit_point(z, self.d)?;
        Ok(self.dissim.iter().map(|set| set.iter().map(|j| 1.0 - z[j]).product()).collect())
    }

    /// Indicator matrix as CSV: one row per observation, one 0/1 column per feature.
    pub fn write_indicators_csv<W: Write>(&self, writer: W, column_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row".to_string()];
        header.extend(column_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.indicator_matrix().iter().enumerate() {
            let mut record = vec![i.to_string()];
            record.extend(row.iter().map(u8::to_string));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn check_unit_point(z: &[f64], d: usize) -> Result<()> {
    if z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: z.len() });
    }
    match z.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::ZOutOfRange { index, value: z[index] }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d3() -> Dataset {
        Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn d3_profile() -> SimilarityProfile {
        let ds = d3();
        SimilarityProfile::build(&ds, &SimilaritySpec::equality(&ds), 0).unwrap()
    }

    #[test]
    fn d3_indicators() {
        let p = d3_profile();
        assert_eq!(p.indicator_matrix(), vec![vec![1, 1], vec![1, 0], vec![0, 0]]);
        assert_eq!(p.dissim_counts(), &[0, 1, 2]);
        assert!(p.dissim_set(0).is_empty());
        assert_eq!(p.dissim_set(1).iter().collect::<Vec<_>>(), vec![1]);
        assert_eq!(p.dissim_set(2).iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn relative_range_threshold() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![0.05], vec![1.0]], vec![0.0; 3]).unwrap();
        let spec = SimilaritySpec::new(&ds, vec![SimilarityRule::RelativeRange(0.1)]).unwrap();
        let p = SimilarityProfile::build(&ds, &spec, 0).unwrap();
        assert_eq!(p.indicator_matrix(), vec![vec![1], vec![1], vec![0]]);
    }

    #[test]
    fn constant_column_is_all_similar() {
        let ds = Dataset::from_rows(&[vec![7.0], vec![7.0], vec![7.0]], vec![0.0; 3]).unwrap();
        let spec = SimilaritySpec::new(&ds, vec![SimilarityRule::RelativeRange(0.1)]).unwrap();
        let p = SimilarityProfile::build(&ds, &spec, 1).unwrap();
        assert_eq!(p.dissim_counts(), &[0, 0, 0]);
    }

    #[test]
    fn absolute_range_and_categorical() {
        let ds = Dataset::new(
            vec![Column::Numeric(vec![0.0, 2.0, 2.5]), Column::categorical(&["a", "b", "a"])],
            vec!["x".into(), "c".into()],
            vec![0.0; 3],
        )
        .unwrap();
        let spec =
            SimilaritySpec::new(&ds, vec![SimilarityRule::AbsoluteRange(2.0), SimilarityRule::Equality]).unwrap();
        let p = SimilarityProfile::build(&ds, &spec, 0).unwrap();
        assert_eq!(p.indicator_matrix(), vec![vec![1, 1], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn target_out_of_range() {
        let ds = d3();
        let err = SimilarityProfile::build(&ds, &SimilaritySpec::equality(&ds), 3).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfRange { target: 3, n: 3 }));
    }

    #[test]
    fn d3_cohorts() {
        let p = d3_profile();
        assert_eq!(p.cohort(&FeatureSet::empty(2)), vec![0, 1, 2]);
        assert_eq!(p.cohort(&FeatureSet::from_indices(2, [0])), vec![0, 1]);
        assert_eq!(p.cohort(&FeatureSet::from_indices(2, [0, 1])), vec![0]);
    }

    #[test]
    fn d3_soft_similarity() {
        let p = d3_profile();
        assert_eq!(p.soft_similarity(&[0.0, 0.0]).unwrap(), vec![1.0; 3]);
        assert_eq!(p.soft_similarity(&[0.5, 0.5]).unwrap(), vec![1.0, 0.5, 0.25]);
        assert!(matches!(p.soft_similarity(&[1.5, 0.0]), Err(Error::ZOutOfRange { index: 0, .. })));
    }

    #[test]
    fn indicators_csv() {
        let p = d3_profile();
        let mut out = Vec::new();
        p.write_indicators_csv(&mut out, &["x1".into(), "x2".into()]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "row,x1,x2\n0,1,1\n1,1,0\n2,0,0\n");
    }

    fn random_profile() -> impl Strategy<Value = SimilarityProfile> {
        (1usize..12, 1usize..20).prop_flat_map(|(d, n)| {
            (Just(d), proptest::collection::vec(proptest::collection::vec(any::<bool>(), d), n), 0..n).prop_map(
                |(d, rows, t)| {
                    let sets = rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            if i == t {
                                FeatureSet::empty(d)
                            } else {
                                FeatureSet::from_indices(d, (0..d).filter(|&j| r[j]))
                            }
                        })
                        .collect();
                    SimilarityProfile::from_dissim_sets(t, d, sets).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn soft_similarity_bounds_and_monotonicity(
            p in random_profile(),
            seeds in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 12),
        ) {
            let d = p.d();
            let z: Vec<f64> = seeds[..d].iter().map(|s| s.0).collect();
            let z2: Vec<f64> = seeds[..d].iter().map(|s| s.0 + (1.0 - s.0) * s.1).collect();
            let s = p.soft_similarity(&z).unwrap();
            let s2 = p.soft_similarity(&z2).unwrap();
            prop_assert_eq!(s[p.target()], 1.0);
            for i in 0..p.n() {
                prop_assert!((0.0..=1.0).contains(&s[i]));
                prop_assert!(s2[i] <= s[i]);
            }
        }

        #[test]
        fn diagonal_soft_similarity_is_a_power(p in random_profile(), alpha in 0.0f64..=1.0) {
            let s = p.soft_similarity(&vec![alpha; p.d()]).unwrap();
            for (i, &c) in p.dissim_counts().iter().enumerate() {
                let expected = (1.0 - alpha).powi(c as i32);
                prop_assert!((s[i] - expected).abs() <= 1e-12);
            }
        }

        #[test]
        fn corners_give_cohort_indicators(p in random_profile(), mask in any::<u64>()) {
            let d = p.d();
            let u = FeatureSet::from_mask(d, mask);
            let z: Vec<f64> = (0..d).map(|j| if u.contains(j) { 1.0 } else { 0.0 }).collect();
            let s = p.soft_similarity(&z).unwrap();
            let cohort = p.cohort(&u);
            for i in 0..p.n() {
                prop_assert_eq!(s[i], if cohort.contains(&i) { 1.0 } else { 0.0 });
            }
        }
    }
}
