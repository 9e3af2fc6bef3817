//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("response column `{0}` is not numeric")]
    NonNumericResponse(String),

    #[error("column `{0}` is not numeric")]
    NonNumericColumn(String),

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("dataset has no rows or no feature columns")]
    EmptyDataset,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid similarity specification: {0}")]
    InvalidSpec(String),

    #[error("target index {target} out of range for {n} observations")]
    TargetOutOfRange { target: usize, n: usize },

    #[error("coordinate {index} of z is {value}, outside [0, 1]")]
    ZOutOfRange { index: usize, value: f64 },

    #[error("dimension {d} exceeds the exact-enumeration cap {cap}")]
    DimensionTooLarge { d: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance submatrix is singular even after regularization")]
    SingularCovariance,

    #[error("feature `{0}` is categorical; the Gaussian kernel value function needs numeric features")]
    CategoricalFeatureUnsupported(String),

    #[error("epsilon {0} is outside (0, 1)")]
    EpsOutOfRange(f64),

    #[error("dissimilarity set is empty")]
    EmptyDissimSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Computation,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidSpec(_) | InvalidArgument(_) | EpsOutOfRange(_) => ErrorClass::Config,
            MissingColumn(_)
            | NonNumericResponse(_)
            | NonNumericColumn(_)
            | MissingValue { .. }
            | EmptyDataset
            | Malformed(_)
            | TargetOutOfRange { .. }
            | DimensionMismatch { .. }
            | CategoricalFeatureUnsupported(_)
            | Csv(_)
            | Io(_) => ErrorClass::Data,
            ZOutOfRange { .. } | DimensionTooLarge { .. } | SingularCovariance | EmptyDissimSet => {
                ErrorClass::Computation
            }
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            MissingColumn(_) => "MissingColumn",
            NonNumericResponse(_) => "NonNumericResponse",
            NonNumericColumn(_) => "NonNumericColumn",
            MissingValue { .. } => "MissingValue",
            EmptyDataset => "EmptyDataset",
            Malformed(_) => "Malformed",
            InvalidSpec(_) => "InvalidSpec",
            TargetOutOfRange { .. } => "TargetOutOfRange",
            ZOutOfRange { .. } => "ZOutOfRange",
            DimensionTooLarge { .. } => "DimensionTooLarge",
            DimensionMismatch { .. } => "DimensionMismatch",
            SingularCovariance => "SingularCovariance",
            CategoricalFeatureUnsupported(_) => "CategoricalFeatureUnsupported",
            EpsOutOfRange(_) => "EpsOutOfRange",
            EmptyDissimSet => "EmptyDissimSet",
            InvalidArgument(_) => "InvalidArgument",
            Csv(_) => "Csv",
            Io(_) => "Io",
        }
    }
}
