use pimc_core::Error;
use serde::{Deserialize, Serialize};

/// Failure classes and their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Unreadable or invalid configuration and parameters (exit 2).
    Config,
    /// A kernel quadrature or table validation failed (exit 3).
    Quadrature,
    /// An estimator raised, e.g. the weight cap or a non-positive mean (exit 4).
    Estimator,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Quadrature => 3,
            ErrorClass::Estimator => 4,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
    /// Paths over the log-weight cap, when that is the failure.
    pub weight_cap_hits: usize,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Config,
            message: message.into(),
            weight_cap_hits: 0,
        }
    }

    pub fn io(context: &str, e: impl std::fmt::Display) -> Self {
        CliError::config(format!("{context}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let class = match &e {
            Error::InvalidParams(_)
            | Error::Domain(_)
            | Error::Divergence(_)
            | Error::ProfileIntegrability(_) => ErrorClass::Config,
            Error::Quadrature { .. } | Error::TableValidation { .. } => ErrorClass::Quadrature,
            Error::WeightCap { .. } | Error::NonPositiveMean(_) => ErrorClass::Estimator,
        };
        let weight_cap_hits = match &e {
            Error::WeightCap { hits, .. } => *hits,
            _ => 0,
        };
        CliError {
            class,
            message: e.to_string(),
            weight_cap_hits,
        }
    }
}
