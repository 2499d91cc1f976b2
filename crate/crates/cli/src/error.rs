use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unsupported report schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Failure inside an estimator, as opposed to bad input or configuration.
    #[error("estimation failed: {0}")]
    Estimation(#[source] sciss_core::Error),
}

impl CliError {
    /// Process exit code: 2 for estimation failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Estimation(_) => 2,
            _ => 1,
        }
    }

    /// Sorts a core error into configuration problems and estimation failures.
    pub fn from_core(e: sciss_core::Error) -> Self {
        use sciss_core::Error as E;
        match e.root() {
            E::InvalidConfig(_)
            | E::InvalidMechanism(_)
            | E::DimensionMismatch { .. }
            | E::QTooLarge(_)
            | E::MissingIntercept(_)
            | E::NonBinaryOutcome
            | E::EmptyLabeled
            | E::EmptyUnlabeled => CliError::Config(e.to_string()),
            _ => CliError::Estimation(e),
        }
    }
}
