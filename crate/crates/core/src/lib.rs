//! Model-free variable importance for a single target observation.
//!
//! Cohort Shapley explains how a target's response differs from the sample
//! mean by refining the cohort of observations similar to it one feature at a
//! time. Its exact cost is exponential in the number of features; the
//! integrated-gradient variant ([`igcs`]) replaces hard cohort membership by a
//! soft weight and integrates along the diagonal of `[0,1]^d` at `O(nRd)` cost.
//!
//! ```
//! use cohort_shapley::{data::{Dataset, SimilaritySpec}, similarity::SimilarityProfile};
//! use cohort_shapley::{igcs::{QuadratureSpec, SoftValue}, shapley::exact_shapley, value::CohortValue};
//!
//! let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0, 3.0])?;
//! let profile = SimilarityProfile::build(&ds, &SimilaritySpec::equality(&ds), 0)?;
//! let cs = exact_shapley(&CohortValue::new(&profile, ds.responses())?)?;
//! assert_eq!(cs.values, vec![-0.25, -0.75]);
//! let ig = SoftValue::new(&profile, ds.responses())?.attribution(&QuadratureSpec::new(1000)?)?;
//! assert!((ig.values[0] + 1.0 / 3.0).abs() < 1e-5);
//! # Ok::<(), cohort_shapley::Error>(())
//! ```

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod igcs;
pub mod shapley;
pub mod similarity;
pub mod synthetic;
pub mod value;

pub use error::{Error, ErrorClass, Result};
pub use features::FeatureSet;
