use thiserror::Error;

/// Errors produced by validation and precondition checks across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]: {reason}")]
    InvalidBox {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        reason: &'static str,
    },

    /// A runtime input violated a precondition (shape mismatch, NaN entry,
    /// out-of-range index, point outside its box, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is unusable (zero levels, bad encoding width,
    /// unknown assigner kind, ...).
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
