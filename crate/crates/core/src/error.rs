use thiserror::Error;

/// Errors raised by the code construction, analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid generator specification: {0}")]
    InvalidGenerator(String),

    #[error("invalid puncturing pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid degree profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible target rate {target}: puncturing fraction would be {phi} (must lie in [0, 1))")]
    InfeasibleRate { target: f64, phi: f64 },

    #[error("stationary distribution did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state alphabet has {size} members, above the bound {bound}")]
    AlphabetBound { size: usize, bound: usize },

    #[error("no non-catastrophic puncturing pattern of period {period} and weight {weight}")]
    NoSafePattern { period: usize, weight: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("received word is inconsistent with the code: {0}")]
    InconsistentInput(String),

    #[error("unknown decoder '{0}'")]
    UnknownDecoder(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
