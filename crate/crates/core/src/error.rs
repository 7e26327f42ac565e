//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("value {value} outside open support ({lo}, {hi}) in coordinate {coord}")]
    OutsideSupport {
        coord: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero-variance chain in coordinate {0}")]
    ZeroVariance(usize),

    #[error("perfect sampler failed to coalesce within {max_sweeps} sweeps")]
    CoalescenceFailure { max_sweeps: u64 },

    #[error("state space too large to enumerate: {0}")]
    EnumerationTooLarge(String),

    #[error("no estimate available for chain point {0}")]
    MissingEstimate(usize),

    #[error("negative Stein radicand {radicand:.3e} in coordinate {coord} exceeds tolerance")]
    NegativeRadicand { coord: usize, radicand: f64 },

    #[error("auxiliary sets must use distinct seeds (got {0} for both)")]
    AuxSeedsNotIndependent(u64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("{op} failed for {count} chain points (first: point {first_index}: {first_error})")]
    PerPointFailures {
        op: &'static str,
        count: usize,
        first_index: usize,
        first_error: String,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
