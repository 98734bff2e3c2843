use thiserror::Error;

use crate::index::IndexSet;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised across the crate.
///
/// Row and column indices carried in variants are 0-based; the CLI
/// shifts them to 1-based when it renders messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("ragged input: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("entry {value} at ({row}, {col}) is not strictly positive")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sum deviates from its target by {deviation:e}")]
    RowSumViolation { row: usize, deviation: f64 },
    #[error("rescale weight {value} at position {index} is not positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("index sets overlap at {index}")]
    Overlap { index: usize },
    #[error("{what} index set is empty")]
    EmptyIndexSet { what: &'static str },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("block solve failed: matrix is numerically singular")]
    SingularBlock,
    #[error("I - A_II is singular: family {family} lies inside the voter set")]
    SingularVoterBlock { family: IndexSet },
    #[error("block is not substochastic (some row sums to at least one)")]
    NotSubstochastic,

    #[error("enumeration refused: {components} condensation components exceed the limit {limit}")]
    TooLarge { components: usize, limit: usize },

    #[error("threshold {threshold} is too large (must lie in (0, min(1/n, max entry)))")]
    ThresholdTooLarge { threshold: f64 },
    #[error("invalid correction matrix: {reason}")]
    InvalidCorrection { reason: String },
    #[error("aggregated coupling matrix has a {dimension}-dimensional stationary space")]
    AmbiguousMixing { dimension: usize },
    #[error("perturbed matrix is not a politics matrix at eps = {eps}")]
    InvalidAtEps { eps: f64 },
    #[error("matrix has full rank; use a plain solve")]
    FullRank,
    #[error("Omega = U* N V is singular; expansion does not apply")]
    OmegaSingular { omega: Vec<Vec<f64>> },
    #[error("no principal block of size {rank} is invertible")]
    NoPivotBlock { rank: usize },
    #[error("{family} is not an upper-class family inside the voter set")]
    NotUpperClass { family: IndexSet },
    #[error("consensus weights sum to zero")]
    DegenerateConsensus,

    #[error("bad distribution: {reason}")]
    BadDistribution { reason: String },
    #[error("tree spec contains a cycle through {node}")]
    CyclicSpec { node: usize },
    #[error("bad tree spec: {reason}")]
    BadTreeSpec { reason: String },
    #[error("bad parameters: {reason}")]
    BadParameters { reason: String },
    #[error("eps = {eps} pushes an entry of I + eps*B outside (0, 1)")]
    EpsTooLarge { eps: f64 },

    #[error("random walk from person {start} exceeded {limit} steps")]
    WalkLimitExceeded { start: usize, limit: usize },
    #[error("trial {trial} exceeded {limit} cycle resamples")]
    ResampleLimit { trial: u64, limit: usize },
    #[error("trials must be at least 1")]
    NoTrials,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to inputs
    /// that violate a validation rule.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularBlock
                | Error::SingularVoterBlock { .. }
                | Error::NotSubstochastic
                | Error::AmbiguousMixing { .. }
                | Error::InvalidAtEps { .. }
                | Error::FullRank
                | Error::OmegaSingular { .. }
                | Error::NoPivotBlock { .. }
                | Error::DegenerateConsensus
                | Error::WalkLimitExceeded { .. }
                | Error::ResampleLimit { .. }
        )
    }
}
