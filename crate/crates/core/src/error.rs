use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col}): {value}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid signal spec: {0}")]
    InvalidSignal(String),

    #[error("anchor vector must be unit norm (|norm - 1| = {deviation:e})")]
    NonUnitAnchor { deviation: f64 },

    #[error("zero vector has no flatness")]
    ZeroVector,

    #[error("exact enumeration needs {states} states, above the cap of {cap}; use monte_carlo mode")]
    EnumerationTooLarge { states: u128, cap: u128 },

    #[error("degenerate sampler: all {trials} pairs were excluded")]
    DegenerateSampler { trials: usize },

    #[error("malformed file at byte {offset}: {what}")]
    Malformed { offset: usize, what: String },

    #[error("unsupported format version {got} (expected {expected})")]
    Version { expected: u32, got: u32 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
