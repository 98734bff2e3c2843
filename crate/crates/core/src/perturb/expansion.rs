//! Two-term Laurent expansion of `(M + εN)^{-1}` around a singular `M`.
//!
//! With right kernel `V` (`MV = 0`), left kernel `U*` (`U*M = 0`),
//! `Ω = U*NV` and `W = VΩ^{-1}U*`,
//!
//! ```text
//! (M + εN)^{-1} = W/ε + (I − WN) Z (I − NW) + O(ε)
//! ```
//!
//! where `Z` is `M_GG^{-1}` placed on a principal pivot block `G` of size
//! `rank(M)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::{self, RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct SingularInverseExpansion {
    /// `V`, n x k.
    pub right_kernel: DMatrix<f64>,
    /// `U*`, k x n.
    pub left_kernel: DMatrix<f64>,
    /// `Ω = U* N V`.
    pub omega_block: DMatrix<f64>,
    /// `W = V Ω^{-1} U*`, the coefficient of `1/ε`.
    pub pole_term: DMatrix<f64>,
    /// `(I − WN) Z (I − NW)`, the `ε^0` coefficient.
    pub regular_term: DMatrix<f64>,
    /// Principal block `G` with `M_GG` invertible.
    pub pivot_set: IndexSet,
}

/// One row of a residual table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionResidual {
    pub eps: f64,
    pub error: f64,
}

impl SingularInverseExpansion {
    pub fn nullity(&self) -> usize {
        self.right_kernel.ncols()
    }

    /// `W/ε + regular_term`.
    pub fn approximate_inverse(&self, eps: f64) -> DMatrix<f64> {
        &self.pole_term / eps + &self.regular_term
    }

    /// `‖(M + εN)^{-1} − W/ε − regular_term‖∞` against a dense inverse.
    pub fn residual(&self, m: &DMatrix<f64>, n: &DMatrix<f64>, eps: f64) -> Result<f64> {
        let exact = linalg::inverse(&(m + n * eps)).ok_or(Error::SingularBlock)?;
        Ok(linalg::max_abs(&(exact - self.approximate_inverse(eps))))
    }

    pub fn residual_table(
        &self,
        m: &DMatrix<f64>,
        n: &DMatrix<f64>,
        eps_list: &[f64],
    ) -> Result<Vec<ExpansionResidual>> {
        eps_list
            .iter()
            .map(|&eps| Ok(ExpansionResidual { eps, error: self.residual(m, n, eps)? }))
            .collect()
    }
}

pub fn singular_inverse_expansion(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<SingularInverseExpansion> {
    singular_inverse_expansion_with_tol(m, n, RANK_TOL)
}

pub fn singular_inverse_expansion_with_tol(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<SingularInverseExpansion> {
    if !m.is_square() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if n.shape() != m.shape() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: n.nrows() });
    }
    let dim = m.nrows();
    let rank = linalg::rank(m, rank_tol);
    if rank == dim {
        return Err(Error::FullRank);
    }
    let v = linalg::right_null_space(m, rank_tol);
    let u = linalg::left_null_space(m, rank_tol);
    let omega = &u * n * &v;
    if linalg::is_singular(&omega, rank_tol) {
        return Err(Error::OmegaSingular { omega: linalg::to_rows(&omega) });
    }
    let omega_inv = linalg::inverse(&omega).ok_or_else(|| Error::OmegaSingular {
        omega: linalg::to_rows(&omega),
    })?;
    let w = &v * omega_inv * &u;

    let pivot_set = principal_pivots(m, rank).ok_or(Error::NoPivotBlock { rank })?;
    let mut z = DMatrix::zeros(dim, dim);
    if !pivot_set.is_empty() {
        let inv = linalg::inverse(&linalg::submatrix(m, &pivot_set, &pivot_set))
            .ok_or(Error::NoPivotBlock { rank })?;
        for (a, i) in pivot_set.iter().enumerate() {
            for (b, j) in pivot_set.iter().enumerate() {
                z[(i, j)] = inv[(a, b)];
            }
        }
    }
    let id = DMatrix::<f64>::identity(dim, dim);
    let regular = (&id - &w * n) * z * (&id - n * &w);
    Ok(SingularInverseExpansion {
        right_kernel: v,
        left_kernel: u,
        omega_block: omega,
        pole_term: w,
        regular_term: regular,
        pivot_set,
    })
}

/// Greedy symmetric pivoting: repeatedly takes the largest remaining
/// diagonal of the Schur complement.
fn principal_pivots(m: &DMatrix<f64>, rank: usize) -> Option<IndexSet> {
    let dim = m.nrows();
    let scale = linalg::max_abs(m);
    let mut s = m.clone();
    let mut active: Vec<usize> = (0..dim).collect();
    let mut chosen = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| s[(a, a)].abs().total_cmp(&s[(b, b)].abs()))?;
        let pivot = s[(p, p)];
        if pivot.abs() <= 1e-13 * scale {
            return None;
        }
        active.swap_remove(pos);
        chosen.push(p);
        for &i in &active {
            let f = s[(i, p)] / pivot;
            for &j in &active {
                s[(i, j)] -= f * s[(p, j)];
            }
        }
    }
    Some(IndexSet::new(chosen))
}
