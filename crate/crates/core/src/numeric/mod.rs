//! Deterministic arithmetic, linear algebra, sampling and the trace recorder.

mod linalg;
mod rng;
mod scalar;
mod stats;
mod trace;

pub use linalg::{cholesky, correlate_noise, LowerTriangular, Matrix, Vector, SYMMETRY_TOLERANCE};
pub use rng::{sample_standard_normal, SeededRng};
pub use scalar::{ensure_finite, Real};
pub use stats::variance;
pub use trace::{CostTable, Op, ParseDigestError, TraceDigest, TraceRecorder, TraceSummary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not lower triangular at ({row}, {col})")]
    NotLowerTriangular { row: usize, col: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("empty input")]
    Empty,
}
