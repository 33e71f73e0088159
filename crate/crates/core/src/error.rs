use thiserror::Error;

/// Errors raised by model construction, solvers, estimators and experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no convergence after {iterations} iterations (last span residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("policy chain is multichain: closed classes {first:?} and {second:?}")]
    Multichain { first: Vec<usize>, second: Vec<usize> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("enumeration budget exceeded: {needed} policies requested, cap is {cap}")]
    Budget { needed: String, cap: usize },

    #[error("residual at step {step} is not on the noise grid (offset {offset})")]
    OffGrid { step: usize, offset: i64 },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("n = {n}: {source}")]
    Member {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("policy {policy:?}: {source}")]
    Policy {
        policy: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// The innermost error, looking through block, member and policy wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Block { source, .. } | Error::Member { source, .. } | Error::Policy { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
