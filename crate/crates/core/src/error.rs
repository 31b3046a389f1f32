//! Crate-wide error type.

/// Errors surfaced by the library.
///
/// The variants map onto process exit codes in the CLI: input/degenerate and
/// numeric failures are domain errors, resource exhaustion is reported with
/// the partial progress that was achieved, and structural errors flag inputs
/// that are degenerate as a whole (e.g. an isotrivial family whose marked
/// orbit never moves).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate parameter: {0}")]
    Degenerate(String),

    #[error("numeric failure: {msg} (worst residual {residual:e})")]
    Numeric { msg: String, residual: f64 },

    #[error("resource budget exceeded: {msg} (completed {partial} steps)")]
    Resource { msg: String, partial: u32 },

    #[error("structural error: {0}")]
    Structural(String),
}

pub type Result<T> = std::result::Result<T, Error>;
