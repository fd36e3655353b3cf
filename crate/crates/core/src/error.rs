use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid conductivity at cell ({row}, {col}): {value}")]
    InvalidField { row: usize, col: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// Factorization broke down or the solution failed the residual check.
    #[error("solver failure at row {row}: {detail}")]
    SolverFailure { row: usize, detail: String },

    #[error("ill-conditioned dense system (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("oversampling matrix is singular (condition estimate {cond:.3e})")]
    OversamplingSingular { cond: f64 },

    #[error("incomplete assembly: {0}")]
    IncompleteAssembly(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
