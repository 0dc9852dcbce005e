//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by kernel construction, solvers, dynamic programming and I/O.
#[derive(Debug, Error)]
pub enum GpsError {
    /// A parameter lies outside the domain where the requested object is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketed root search failed to converge.
    #[error("root search for {what} did not converge after {iterations} iterations; bracket [{lo}, {hi}], residual {residual:e}")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    /// A root search was started on an interval without a sign change.
    #[error("no sign change for {what} on [{lo}, {hi}] (values {f_lo:e}, {f_hi:e})")]
    NoBracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A table would exceed the configured memory budget.
    #[error("table of {rows}x{cols} cells needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Size {
        rows: usize,
        cols: usize,
        required_bytes: u64,
        budget_bytes: u64,
    },

    /// A configuration file or field could not be interpreted.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure, with line and column context.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GpsError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(GpsError::Domain(msg.into()))
}
