use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A query fell outside tabulated or sampled data.
    #[error("range error: {0}")]
    Range(String),

    /// Requested lifetime cannot be reached with a reflectivity <= 1.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-decaying signal: {0}")]
    NonDecaying(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("division by zero reference: {0}")]
    ZeroReference(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::FitFailure(msg.into())
    }

    /// True for errors raised while fitting or simulating, as opposed to
    /// bad input configuration.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData(_) | Error::NonDecaying(_) | Error::FitFailure(_) | Error::ZeroReference(_)
        )
    }
}
