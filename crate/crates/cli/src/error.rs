use std::path::PathBuf;

use bdt_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status. 2 is left to clap for usage errors; every core
    /// error kind gets its own code from 10 upward.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Config(_) => 4,
            CliError::Core { source, .. } => core_exit_code(source),
        }
    }
}

pub fn core_exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Csv { .. } => 10,
        CoreError::MissingColumn(_) => 11,
        CoreError::DateParse { .. } => 12,
        CoreError::InsufficientData { .. } => 13,
        CoreError::Ordering { .. } => 14,
        CoreError::InvalidValue { .. } => 15,
        CoreError::SanityRange { .. } => 16,
        CoreError::Extrapolation { .. } => 17,
        CoreError::DivisionByZero { .. } => 18,
        CoreError::DegenerateProbability { .. } => 19,
        CoreError::CalibrationInfeasible { .. } => 20,
        CoreError::Index { .. } => 21,
        CoreError::ProbabilityRange { .. } => 22,
        CoreError::OracleSize(_) => 23,
        CoreError::UnattainablePrice { .. } => 24,
        CoreError::NonIdentifiable => 25,
        CoreError::IndeterminateSigma => 26,
        CoreError::NumericDomain(_) => 27,
        CoreError::WrongBranch { .. } => 28,
        CoreError::NoConvergence { .. } => 29,
        CoreError::InvalidArgument(_) => 30,
    }
}

pub trait Context<T> {
    fn context(self, context: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, context: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: context.into(),
            source,
        })
    }
}
