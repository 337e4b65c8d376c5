use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {what} at {location}")]
    NonFinite { what: String, location: String },

    #[error("quadrature did not converge: {what} (residual estimate {residual:.3e})")]
    Quadrature { what: String, residual: f64 },

    #[error("kernel `{0}` decays slowly; operator use requires an explicit truncation acknowledgement")]
    SlowKernel(String),

    #[error("periodization divergent or untrusted for kernel `{0}`")]
    Periodization(String),

    #[error("unresolved spectrum: {what} (mass at grid edge {edge_mass:.3e})")]
    UnresolvedSpectrum { what: String, edge_mass: f64 },

    #[error("step exceeds grid margin: {0}")]
    GridMargin(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
