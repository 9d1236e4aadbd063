//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed graph structure (out-of-range indices, asymmetric input, ...).
    #[error("structural input error: {0}")]
    StructuralInput(String),

    /// Input values violate a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad configuration (ratios, budgets, coefficients, paths).
    #[error("config error: {0}")]
    Config(String),

    /// Tensor dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation received an empty or otherwise degenerate input.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A computed quantity is non-finite; the message names the term.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dataset files do not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// File contents could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
