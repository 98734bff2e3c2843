//! Power vectors of politics matrices.
//!
//! The power `ω*` is the positive left eigenvector of `A` for eigenvalue 1,
//! normalized to sum 1; every row of `lim A^k` equals it. Three routes are
//! offered and cross-checked in tests: left iteration `x <- xA`, the
//! closed-form block solve pivoting on one person, and repeated squaring
//! of `A` until its columns are flat.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::{self, RANK_TOL};
use crate::matrix::{PoliticsMatrix, StochasticMatrix};

/// Default tolerance for library calls.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap when no contraction bound is available.
pub const MAX_ITERS: usize = 1_000_000;

/// Positive left stationary vector, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub(crate) fn from_unnormalized(v: Vec<f64>) -> Self {
        let s: f64 = v.iter().sum();
        PowerVector(v.into_iter().map(|x| x / s).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_row(&self) -> RowDVector<f64> {
        RowDVector::from_row_slice(&self.0)
    }

    /// `‖ω A − ω‖∞`.
    pub fn residual<M: StochasticMatrix>(&self, a: &M) -> f64 {
        let w = self.as_row();
        let diff = &w * a.matrix() - &w;
        diff.amax()
    }

    pub fn max_abs_diff(&self, other: &PowerVector) -> f64 {
        linalg::max_abs_diff(&self.0, &other.0)
    }
}

/// Contraction data: smallest entry `ε` and factor `1 - nε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionBound {
    pub eps_min: f64,
    pub factor: f64,
}

impl ContractionBound {
    /// Iterations after which every column of `A^k` has range at most `tol`,
    /// starting from the identity (range 1).
    pub fn iterations_for(&self, tol: f64, initial_range: f64) -> usize {
        if self.factor <= 0.0 || initial_range <= tol {
            return 1;
        }
        let k = ((tol / initial_range).ln() / self.factor.ln()).ceil();
        if k.is_finite() && k < MAX_ITERS as f64 {
            k as usize
        } else {
            MAX_ITERS
        }
    }
}

pub fn contraction_bound(a: &PoliticsMatrix) -> ContractionBound {
    let n = a.n() as f64;
    let eps_min = a.matrix().min();
    ContractionBound { eps_min, factor: (1.0 - n * eps_min).max(0.0) }
}

/// Iterates `x <- xA` from the uniform vector until `‖xA − x‖∞ ≤ tol`.
pub fn power_iterative(a: &PoliticsMatrix, tol: f64) -> Result<PowerVector> {
    let n = a.n();
    let cap = (contraction_bound(a).iterations_for(tol, 1.0) + 2).min(MAX_ITERS);
    let mut x = RowDVector::from_element(n, 1.0 / n as f64);
    for _ in 0..cap {
        let next = &x * a.matrix();
        let diff = (&next - &x).amax();
        if diff <= tol {
            return Ok(PowerVector::from_unnormalized(x.iter().copied().collect()));
        }
        x = next;
    }
    Err(Error::NoConvergence { iterations: cap })
}

/// Closed form pivoting on person 1: with `J = {2..n}`,
/// `ω ∝ [1, A_1J (I − A_JJ)^{-1}]`.
pub fn power_explicit(a: &PoliticsMatrix) -> Result<PowerVector> {
    power_explicit_pivot(a, 0)
}

/// Closed form pivoting on an arbitrary person.
pub fn power_explicit_pivot<M: StochasticMatrix>(a: &M, pivot: usize) -> Result<PowerVector> {
    let n = a.n();
    if pivot >= n {
        return Err(Error::IndexOutOfRange { index: pivot, n });
    }
    if n == 1 {
        return Ok(PowerVector(vec![1.0]));
    }
    let rest = IndexSet::new((0..n).filter(|&i| i != pivot));
    let a_rest = a.block(&rest, &rest);
    let m = DMatrix::<f64>::identity(n - 1, n - 1) - a_rest;
    // ω_J (I − A_JJ) = A_pJ  <=>  (I − A_JJ)^T ω_J^T = A_pJ^T
    let rhs = a.block(&IndexSet::new([pivot]), &rest).transpose();
    let sol = linalg::solve(&m.transpose(), &rhs).ok_or(Error::SingularBlock)?;
    let mut w = vec![0.0; n];
    w[pivot] = 1.0;
    for (k, j) in rest.iter().enumerate() {
        w[j] = sol[(k, 0)];
    }
    Ok(PowerVector::from_unnormalized(w))
}

/// Squares `A` until every column has range at most `tol`; returns the
/// resulting power of `A`.
pub fn matrix_power_limit(a: &PoliticsMatrix, tol: f64) -> Result<DMatrix<f64>> {
    let mut p = a.matrix().clone();
    // Squaring doubles the exponent, so 64 rounds exceed any useful k.
    for _ in 0..64 {
        let spread = p
            .column_iter()
            .map(|c| linalg::range(c.as_slice()))
            .fold(0.0_f64, f64::max);
        if spread <= tol {
            return Ok(p);
        }
        p = &p * &p;
    }
    Err(Error::NoConvergence { iterations: 64 })
}

/// First row of `lim A^k`.
pub fn power_row_limit(a: &PoliticsMatrix, tol: f64) -> Result<PowerVector> {
    let p = matrix_power_limit(a, tol)?;
    Ok(PowerVector::from_unnormalized(p.row(0).iter().copied().collect()))
}

/// Applies `u <- Au` until `u` is flat to within `tol`; returns the limit
/// constant `c` with `A^k u → c η`.
pub fn iterate_limit(a: &PoliticsMatrix, u: &[f64], tol: f64) -> Result<f64> {
    if u.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: u.len() });
    }
    let mut v = DVector::from_column_slice(u);
    let start = linalg::range(v.as_slice());
    let cap = (contraction_bound(a).iterations_for(tol, start) + 2).min(MAX_ITERS);
    for _ in 0..cap {
        if linalg::range(v.as_slice()) <= tol {
            break;
        }
        v = a.matrix() * v;
    }
    Ok((v.max() + v.min()) / 2.0)
}

/// Unnormalized left eigenvector for eigenvalue 1, straight from the
/// null space of `(I − A)`; its overall sign is arbitrary.
pub fn left_eigenvector<M: StochasticMatrix>(a: &M) -> Result<Vec<f64>> {
    let n = a.n();
    let m = DMatrix::<f64>::identity(n, n) - a.matrix();
    let kernel = linalg::left_null_space(&m, RANK_TOL);
    if kernel.nrows() == 0 {
        return Err(Error::SingularBlock);
    }
    Ok(kernel.row(0).iter().copied().collect())
}
