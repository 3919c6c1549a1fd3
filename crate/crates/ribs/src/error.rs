use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    /// The direct factorization hit a (near-)zero pivot, or a solve failed
    /// the residual check. Typically a resonant potential shift.
    #[error("operator is numerically singular (near-zero pivot or residual check failed)")]
    SingularOperator,

    /// Every singular value fell below the truncation threshold.
    #[error("truncated SVD retained no singular values")]
    EmptySpectrum,

    /// Two grid functions that must share a grid do not.
    #[error("grid mismatch: expected {expected} cells, got {got}")]
    GridMismatch { expected: usize, got: usize },

    /// Fine/coarse transfer requires the fine cell count to be an integer
    /// multiple of the coarse one.
    #[error("incompatible grids: fine {fine} cells is not a multiple of coarse {coarse}")]
    IncompatibleGrids { fine: usize, coarse: usize },

    /// A series evaluation asked for an order beyond the configured cap.
    #[error("series order {order} exceeds the configured maximum {max}")]
    CompositionOverflow { order: usize, max: usize },

    /// Power series reversion needs a nonzero linear coefficient.
    #[error("leading series coefficient is zero; reversion is undefined")]
    ZeroLinearCoefficient,

    /// The convergence condition (1 + alpha) * mu * ||b1|| < 1 failed.
    #[error("convergence condition violated: (1+alpha)*mu*||b1|| = {0} >= 1")]
    ConditionViolated(f64),

    /// The two-frequency split needs two distinct frequencies.
    #[error("frequencies must differ (both are {0})")]
    EqualFrequencies(f64),

    /// Conductivity fields must be strictly positive.
    #[error("conductivity must be positive everywhere (min value {0})")]
    NonPositiveSigma(f64),

    /// A shape or argument-count violation in a multilinear application.
    #[error("{0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
