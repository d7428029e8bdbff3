use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped so front ends can map them to exit classes:
/// [`Error::is_input_error`] covers malformed user input (expressions,
/// CSV grids, invalid specs), [`Error::is_capacity_error`] covers
/// configured-cap violations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} exceeds arity {arity} (byte {offset})")]
    VariableOutOfRange {
        index: usize,
        arity: usize,
        offset: usize,
    },

    #[error("non-finite value {value} at grid index {index:?}")]
    NonFinite { value: f64, index: Vec<usize> },

    #[error("grid mismatch: {message}")]
    GridMismatch { message: String },

    #[error("{what} {requested} exceeds cap {cap}")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("block size must be even and positive, got {0}")]
    OddBlockSize(usize),

    #[error("invalid moment sequence: {0}")]
    InvalidMoments(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("malformed grid CSV: {0}")]
    Csv(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors caused by malformed textual input or invalid specs.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::VariableOutOfRange { .. }
                | Error::Csv(_)
                | Error::Invalid(_)
                | Error::InvalidMoments(_)
                | Error::OddBlockSize(_)
        )
    }

    /// True when a configured cap (oracle size, partition order, traversal
    /// budget, grid size, expansion count) was exceeded.
    pub fn is_capacity_error(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
