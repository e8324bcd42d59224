use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("window side {side} is not compatible with the unit lattice")]
    IncompatibleWindow { side: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model is not integrable")]
    NonIntegrableModel,
    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error})")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("wavevector must be nonzero")]
    ZeroWavevector,
    #[error("no source points inside the core window")]
    EmptyCore,
    #[error("cardinality mismatch: {left} vs {right}")]
    CardinalityMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("cost function is not a continuity modulus")]
    NonModulusCost,
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("transport problem is infeasible")]
    Infeasible,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
