use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("infeasible flow: {0}")]
    Infeasible(String),

    #[error("invalid coefficients: {0}")]
    Coefficients(String),

    /// The best response sits on a clipped boundary, where the slope is zero
    /// by construction rather than given by implicit differentiation.
    #[error("best response for link {link} is on the boundary branch (value {value}, q = {demand})")]
    BoundaryBranch { link: usize, value: f64, demand: f64 },

    #[error("data point {index}: {reason}")]
    DataPoint { index: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("exact solver guard exceeded: {binaries} binaries > limit {limit}; use the heuristic solver or raise the limit")]
    SolverGuard { binaries: usize, limit: usize },

    #[error("linear subproblem failed: {0}")]
    Lp(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
