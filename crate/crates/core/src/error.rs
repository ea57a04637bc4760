use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Stieltjes transform evaluated at spectral point {0}")]
    SingularPoint(f64),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("rank deficient: smallest eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    RankDeficient { min_eigenvalue: f64, tolerance: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("objective failed at theta = {theta} within bracket [{lo}, {hi}]: {source}")]
    Objective {
        theta: f64,
        lo: f64,
        hi: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("eigendecomposition did not converge")]
    Eigensolver,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
