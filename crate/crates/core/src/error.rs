use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A `ParameterSet` (or another input value) violates one of its invariants.
    #[error("invalid parameters: {0}")]
    Validation(String),

    /// An operation was called outside the hypotheses it is defined under.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The field cannot be projected onto the Nehari manifold.
    #[error("cannot project onto the Nehari manifold: {0}")]
    Degenerate(String),

    #[error("bad sweep axis: {0}")]
    Sweep(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
