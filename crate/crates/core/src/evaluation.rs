//! Conditional insertion/deletion curves and area-between-curves scores.
//!
//! Variables are ranked by attribution. The insertion curve is the cohort
//! mean after conditioning on the top `k` variables; the deletion curve
//! conditions on all but the top `k`. Each ABC compares the curve with the
//! straight chord between its endpoints, using the trapezoid rule with unit
//! spacing on `[0, d]`.

use crate::error::{Error, Result};
use crate::shapley::{random_permutation, sample_rng, Attribution, ValueFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Feature indices by descending value; ties keep ascending index.
pub fn variable_ordering(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn check_permutation(ordering: &[usize], d: usize) -> Result<()> {
    if ordering.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: ordering.len() });
    }
    let mut seen = vec![false; d];
    for &j in ordering {
        if j >= d || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidArgument(format!("ordering is not a permutation of 0..{d}")));
        }
    }
    Ok(())
}

/// `(insertion, deletion)` curves, each of length `d + 1`.
pub fn conditional_curves(nu: &dyn ValueFunction, ordering: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_permutation(ordering, nu.dim())?;
    let insertion = nu.chain_values(ordering)?;
    let reversed: Vec<usize> = ordering.iter().rev().copied().collect();
    // deletion[k] conditions on the last d - k variables of the ordering.
    let mut deletion = nu.chain_values(&reversed)?;
    deletion.reverse();
    Ok((insertion, deletion))
}

fn trapezoid(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
}

fn chord_area(curve: &[f64]) -> f64 {
    let d = (curve.len() - 1) as f64;
    0.5 * d * (curve[0] + curve[curve.len() - 1])
}

/// `(abc_insertion, abc_deletion)`.
pub fn abc_scores(insertion: &[f64], deletion: &[f64]) -> Result<(f64, f64)> {
    if insertion.is_empty() || insertion.len() != deletion.len() {
        return Err(Error::DimensionMismatch { expected: insertion.len(), found: deletion.len() });
    }
    Ok((trapezoid(insertion) - chord_area(insertion), chord_area(deletion) - trapezoid(deletion)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcReport {
    pub target_index: usize,
    pub ordering: Vec<usize>,
    pub insertion_curve: Vec<f64>,
    pub deletion_curve: Vec<f64>,
    pub abc_insertion: f64,
    pub abc_deletion: f64,
}

impl AbcReport {
    pub fn for_ordering(nu: &dyn ValueFunction, ordering: Vec<usize>) -> Result<Self> {
        let (insertion_curve, deletion_curve) = conditional_curves(nu, &ordering)?;
        let (abc_insertion, abc_deletion) = abc_scores(&insertion_curve, &deletion_curve)?;
        Ok(Self {
            target_index: nu.target().unwrap_or(0),
            ordering,
            insertion_curve,
            deletion_curve,
            abc_insertion,
            abc_deletion,
        })
    }

    pub fn for_attribution(nu: &dyn ValueFunction, attr: &Attribution) -> Result<Self> {
        if attr.dim() != nu.dim() {
            return Err(Error::DimensionMismatch { expected: nu.dim(), found: attr.dim() });
        }
        Self::for_ordering(nu, variable_ordering(&attr.values))
    }

    pub fn abc_sum(&self) -> f64 {
        self.abc_insertion + self.abc_deletion
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// The standard error is 0 for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub trials: usize,
    pub abc_insertion: MeanStderr,
    pub abc_deletion: MeanStderr,
    pub abc_sum: MeanStderr,
}

/// ABCs of `trials` uniformly random orderings; trial `k` uses
/// [`sample_rng`]`(seed, k)`.
pub fn random_ordering_baseline(nu: &dyn ValueFunction, trials: usize, seed: u64) -> Result<BaselineSummary> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let d = nu.dim();
    let scores: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let order = random_permutation(d, &mut sample_rng(seed, k as u64));
            let r = AbcReport::for_ordering(nu, order)?;
            Ok((r.abc_insertion, r.abc_deletion))
        })
        .collect::<Result<_>>()?;
    let ins: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let del: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let sum: Vec<f64> = scores.iter().map(|s| s.0 + s.1).collect();
    Ok(BaselineSummary {
        trials,
        abc_insertion: MeanStderr::of(&ins),
        abc_deletion: MeanStderr::of(&del),
        abc_sum: MeanStderr::of(&sum),
    })
}

/// Orderings encoded as attribution values: the feature at position `p` of
/// `ordering` gets `d - p`, so [`variable_ordering`] recovers `ordering`.
pub fn ordering_as_values(ordering: &[usize]) -> Vec<f64> {
    let d = ordering.len();
    let mut values = vec![0.0; d];
    for (p, &j) in ordering.iter().enumerate() {
        values[j] = (d - p) as f64;
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, SimilaritySpec};
    use crate::similarity::SimilarityProfile;
    use crate::value::CohortValue;

    fn d3_profile() -> SimilarityProfile {
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0]).unwrap();
        SimilarityProfile::build(&ds, &SimilaritySpec::equality(&ds), 0).unwrap()
    }

    const F3: [f64; 3] = [1.0, 2.0, 3.0];

    #[test]
    fn orderings() {
        assert_eq!(variable_ordering(&[-0.25, -0.75]), vec![0, 1]);
        assert_eq!(variable_ordering(&[0.0, 0.0, 0.0]), vec![0, 1, 2]);
        assert_eq!(variable_ordering(&[1.0, 3.0, 2.0]), vec![1, 2, 0]);
        assert_eq!(variable_ordering(&[1.0, 2.0, 1.0, 2.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn d3_curves_and_scores() {
        let p = d3_profile();
        let nu = CohortValue::new(&p, &F3).unwrap();
        let (ins, del) = conditional_curves(&nu, &[0, 1]).unwrap();
        assert_eq!(ins, vec![2.0, 1.5, 1.0]);
        assert_eq!(del, vec![1.0, 1.0, 2.0]);
        assert_eq!(abc_scores(&ins, &del).unwrap(), (0.0, 0.5));

        let r = AbcReport::for_ordering(&nu, vec![1, 0]).unwrap();
        assert_eq!(r.insertion_curve, vec![2.0, 1.0, 1.0]);
        assert_eq!(r.deletion_curve, vec![1.0, 1.5, 2.0]);
        assert_eq!((r.abc_insertion, r.abc_deletion), (-0.5, 0.0));
    }

    #[test]
    fn constant_curve_scores_zero() {
        assert_eq!(abc_scores(&[3.0; 5], &[3.0; 5]).unwrap(), (0.0, 0.0));
        assert!(abc_scores(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn reversed_insertion_is_deletion() {
        let p = d3_profile();
        let nu = CohortValue::new(&p, &F3).unwrap();
        let (_, del) = conditional_curves(&nu, &[0, 1]).unwrap();
        let (mut ins_rev, _) = conditional_curves(&nu, &[1, 0]).unwrap();
        ins_rev.reverse();
        assert_eq!(ins_rev, del);
    }

    #[test]
    fn bad_orderings_rejected() {
        let p = d3_profile();
        let nu = CohortValue::new(&p, &F3).unwrap();
        assert!(conditional_curves(&nu, &[0]).is_err());
        assert!(conditional_curves(&nu, &[0, 0]).is_err());
        assert!(conditional_curves(&nu, &[0, 2]).is_err());
    }

    #[test]
    fn baseline_on_d3() {
        let p = d3_profile();
        let nu = CohortValue::new(&p, &F3).unwrap();
        let a = random_ordering_baseline(&nu, 50, 1).unwrap();
        assert_eq!(a, random_ordering_baseline(&nu, 50, 1).unwrap());
        // Each trial is one of the two orderings, whose ABC sums are +0.5 and -0.5.
        assert!(a.abc_sum.mean.abs() <= 0.5);
    }

    #[test]
    fn ordering_values_round_trip() {
        let order = vec![2, 0, 3, 1];
        let values = ordering_as_values(&order);
        assert_eq!(values, vec![3.0, 1.0, 4.0, 2.0]);
        assert_eq!(variable_ordering(&values), order);
    }

    #[test]
    fn mean_stderr() {
        let m = MeanStderr::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStderr::of(&[4.0]).stderr, 0.0);
    }
}
