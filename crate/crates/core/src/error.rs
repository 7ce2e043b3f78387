use thiserror::Error;

/// Errors raised by model validation, calibration and bin-count selection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),

    #[error("invalid partition: {0}")]
    InvalidPartition(&'static str),

    #[error("invalid detector config: {0}")]
    InvalidConfig(&'static str),

    #[error("quantile search did not converge for u = {u}")]
    Calibration { u: f64 },

    #[error("need at least {needed} reference samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite sample at position {index}")]
    NonFiniteSample { index: usize },

    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuity(&'static str),

    #[error("probability vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("tail integral diverges for N = {n}: boundaries do not straddle zero")]
    DivergentTail { n: usize },

    #[error("moment bounds need at least 3 bins, got {n}")]
    TooFewBins { n: usize },

    #[error("no admissible bin count found up to n_max = {n_max}")]
    NonTermination { n_max: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
