use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent kernel value: {0}")]
    Divergence(String),

    #[error("quadrature did not converge ({what}): estimate {estimate:e}, error bound {error:e}")]
    Quadrature {
        what: String,
        estimate: f64,
        error: f64,
    },

    #[error("kernel table validation failed: measured error {measured:e} exceeds requested {requested:e}")]
    TableValidation { measured: f64, requested: f64 },

    #[error("log-weight {max_log_weight:.3} exceeds cap {cap} on {hits} path(s); reduce g or T")]
    WeightCap {
        cap: f64,
        hits: usize,
        max_log_weight: f64,
    },

    #[error(
        "real part of the vacuum estimate is not positive ({0:e}); increase n_paths or lower T"
    )]
    NonPositiveMean(f64),

    #[error("profile is not integrable: {0}")]
    ProfileIntegrability(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors originating in the kernel/quadrature layer.
    pub fn is_quadrature(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Divergence(_) | Error::TableValidation { .. }
        )
    }
}
