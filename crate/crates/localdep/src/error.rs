//! Error type shared by every estimator in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data or evaluating a statistic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: need at least 2 observations, got {got}")]
    InsufficientData { got: usize },

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("length mismatch: {left} x-values vs {right} y-values")]
    LengthMismatch { left: usize, right: usize },

    #[error("value {value} outside (0, 1] at row {row}")]
    OutOfUnitInterval { value: f64, row: usize },

    #[error("delta must be positive, got {value}")]
    NonPositiveDelta { value: f64 },

    #[error("epsilon must be positive, got {value}")]
    NonPositiveEpsilon { value: f64 },

    #[error("no delta-neighbors at this scale")]
    NoDeltaNeighbors,

    #[error("epsilon below sample resolution: every neighborhood is empty")]
    EpsilonBelowResolution,

    #[error("degenerate: Y constant")]
    ConstantY,

    #[error("degenerate: V constant")]
    ConstantV,

    #[error("zero variance along {axis}")]
    ZeroVariance { axis: &'static str },

    #[error("k must lie in 1..={max}, got {k}")]
    KOutOfRange { k: usize, max: usize },

    #[error("bins must lie in 1..={max}, got {bins}")]
    BinsOutOfRange { bins: usize, max: usize },

    #[error("correlation must lie in [-1, 1], got {value}")]
    InvalidCorrelation { value: f64 },

    #[error("generator spec: {0}")]
    InvalidGeneratorSpec(String),

    #[error("quadratic-cost guard: n = {n} exceeds {guard}; override explicitly to run anyway")]
    QuadraticGuard { n: usize, guard: usize },
}
