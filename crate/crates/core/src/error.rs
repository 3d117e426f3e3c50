use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rate matrix has a (numerically) zero diagonal entry, so the relay
    /// subset it describes is inadmissible.
    #[error("rate matrix is singular (zero diagonal at row {row})")]
    SingularMatrix { row: usize },

    #[error("no feasible relay subset (direct link capacity is zero and no relay path works)")]
    NoFeasibleSolution,

    #[error("need at least one sample below the outage target: {samples} samples at epsilon {epsilon}")]
    InsufficientSamples { samples: usize, epsilon: f64 },

    #[error("arithmetic overflow: {0}")]
    Overflow(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
