use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("metric is not symmetric")]
    AsymmetricMetric,

    #[error("metric is not positive-definite")]
    NotPositiveDefinite,

    #[error("invalid complex structure: {0}")]
    InvalidComplexStructure(&'static str),

    #[error("operation requires a two-dimensional surface model")]
    RequiresSurface,

    #[error("operation requires a bulk model")]
    RequiresBulk,

    #[error("non-physical state: {0}")]
    InvalidState(String),

    #[error("singular coefficient: {name} vanishes at rho={rho}, T={temperature}")]
    SingularCoefficient {
        name: &'static str,
        rho: f64,
        temperature: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time step {dt} exceeds stability bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("numerical abort at t={time}: {reason}")]
    NumericalAbort { time: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
