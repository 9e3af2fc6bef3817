use cohort_shapley::ErrorClass;
use serde::Serialize;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] cohort_shapley::Error),

    #[error("cannot write `{path}`: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) => ErrorClass::Config,
            CliError::Data(_) | CliError::Output { .. } => ErrorClass::Data,
            CliError::Core(e) => e.class(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Computation => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Data(_) => "Data",
            CliError::Output { .. } => "Output",
            CliError::Core(e) => e.kind(),
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            record: &'static str,
            class: &'static str,
            kind: &'a str,
            exit_code: i32,
            message: String,
        }
        let class = match self.class() {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Computation => "computation",
        };
        let r = Record {
            record: "error",
            class,
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        };
        serde_json::to_string(&r).expect("error record serializes")
    }
}
