//! A matrix model of political influence.
//!
//! A society of `n` persons is a row-stochastic matrix `A`, where `a_ij`
//! is the probability that person `i` listens to person `j`. From it the
//! crate derives each person's *power* (the stationary left vector), the
//! *support* voters give a set of candidates, the *families* of a
//! dominated (nonnegative) matrix, and the limits of all of these as the
//! small listening weights `εB` vanish. A seeded Monte Carlo delegation
//! simulator samples the same quantities independently.

pub mod election;
pub mod error;
pub mod families;
pub mod index;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod perturb;
pub mod power;
pub mod simulate;
pub mod structures;

pub use error::{Error, Result};
pub use index::{IndexPartition, IndexSet};
pub use matrix::{
    centered, row_rescale, validate, CenteredMatrix, DominatedMatrix, MatrixKind,
    PoliticsMatrix, StochasticMatrix, SubmatrixBlock, Validated,
};
pub use power::{ContractionBound, PowerVector};
