use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vertex index {index} out of range: side length {side} has {count} vertices")]
    VertexOutOfRange { index: usize, side: usize, count: usize },

    #[error("vertices {0} and {1} are not nearest neighbors")]
    NotAdjacent(usize, usize),

    #[error("side length {got} too small: this operation needs N >= {min}")]
    SideTooSmall { got: usize, min: usize },

    #[error("configuration is not pinned: height at the origin is {0}, expected 0")]
    NotPinned(i64),

    #[error("height field length {got} does not match lattice with {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },

    #[error("precondition x_i > x_j violated: x_i = {xi}, x_j = {xj}")]
    NotAboveAt { xi: i64, xj: i64 },

    #[error("enumeration needs {required} evaluations, over the budget of {budget}; raise the budget to proceed")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("contour bound undefined: contour sum bound is {bound} >= 1 (needs beta > 2.6421)")]
    BoundDiverges { bound: f64 },

    #[error("inverse temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("{measurements} measurement sweeps cannot fill {batches} batches; increase sweeps or cut burn-in")]
    TooFewSweeps { measurements: u64, batches: u64 },

    #[error("origin row/column is excluded from the reduced system")]
    OriginExcluded,

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
