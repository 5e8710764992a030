use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The observed RB states cannot be produced by any user count in the
    /// searched range.
    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),

    #[error("enumeration of {count} start vectors exceeds the cap of {cap}; use SS-ML-LS instead")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("Markov state space holds {states} entries, above the memory bound of {bound}")]
    StateSpaceTooLarge { states: usize, bound: usize },

    #[error("insufficient history: need {needed} values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best: Box<crate::prediction::ArimaSpec>,
    },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("outage: {0}")]
    Outage(String),

    #[error("mismatched start vector: components sum to {sum}, expected {expected}")]
    StartVectorSum { sum: u64, expected: u64 },

    #[error("table cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::InconsistentObservation(_) => "inconsistent_observation",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::StateSpaceTooLarge { .. } => "state_space_too_large",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Undefined(_) => "undefined",
            Error::Outage(_) => "outage",
            Error::StartVectorSum { .. } => "start_vector_sum",
            Error::Cache { .. } => "cache",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }
}
