use thiserror::Error;

/// Errors raised by the library. Numerical outcomes such as "capacity is
/// zero" are reported through result types, not through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid datum: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular block at vertex {vertex}")]
    Singular { vertex: String },

    #[error("quiver contains a directed cycle through vertex {0}")]
    Cycle(String),

    #[error("weight sign pattern invalid: {0}")]
    WeightSign(String),

    #[error("path enumeration exceeded the cap of {0} paths")]
    PathCap(usize),

    #[error("exponents not orthogonal to dimension vector: {lhs} != {rhs}")]
    Orthogonality { lhs: String, rhs: String },

    #[error("invalid exponent tuple: {0}")]
    Exponents(String),

    #[error("scaling report has not converged: {0}")]
    NotConverged(String),

    #[error("problem too large for the brute-force oracle: N = {n} exceeds cap {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
