use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite density evaluation at z = {z:?}")]
    NumericDomain { z: Vec<f64> },

    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error("overlap insufficient: {0}")]
    OverlapInsufficient(String),

    #[error("condition C violated at r = {r:e} (margin {margin:e})")]
    ConditionViolated { r: f64, margin: f64 },

    #[error("divergent tail integral: {0}")]
    DivergentTail(String),

    #[error("no regularity certificate at eps = {eps:e} (A_eps = {a_eps:e})")]
    NoRegularity { eps: f64, a_eps: f64 },

    #[error("state blew up at t = {t}")]
    BlowUp { t: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("truncation error {error:e} above tolerance at level cap {levels}")]
    Truncation { error: f64, levels: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
