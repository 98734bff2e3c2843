//! Dense numerical helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, RowDVector, SVD};

use crate::index::IndexSet;

/// Relative singular-value threshold for rank and singularity decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Condition estimate above which a solve is reported as near-singular.
pub const NEAR_SINGULAR_COND: f64 = 1e12;

fn svd_of(m: &DMatrix<f64>) -> SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    m.clone().svd(true, true)
}

fn cutoff(sv: &DVector<f64>, rel_tol: f64) -> f64 {
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    rel_tol * max
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let cut = cutoff(&sv, rel_tol);
    if cut == 0.0 {
        return sv.iter().filter(|&&s| s > 0.0).count();
    }
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn is_singular(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    rank(m, rel_tol) < m.nrows().min(m.ncols())
}

/// 2-norm condition number; infinite when the smallest singular value is 0.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthonormal basis of `{x : m x = 0}` as the columns of an n x k matrix.
pub fn right_null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    // Pad to square so the SVD exposes a full right basis.
    let square = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = svd_of(&square);
    let cut = cutoff(&svd.singular_values, rel_tol);
    let v_t = svd.v_t.expect("requested V^T");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of `{y : y m = 0}` as the rows of a k x n matrix.
pub fn left_null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    right_null_space(&m.transpose(), rel_tol).transpose()
}

/// Solves `a x = b` by partial-pivot LU. `None` when the factorization
/// hits an exact zero pivot or the result is not finite.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = svd_of(a);
    let cut = cutoff(&svd.singular_values, rel_tol).max(f64::MIN_POSITIVE);
    svd.solve(b, cut).expect("U and V^T were requested")
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    solve(a, &DMatrix::identity(a.nrows(), a.nrows()))
}

/// `m[rows, cols]`.
pub fn submatrix(m: &DMatrix<f64>, rows: &IndexSet, cols: &IndexSet) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        m[(rows.as_slice()[r], cols.as_slice()[c])]
    })
}

pub fn sub_row(v: &RowDVector<f64>, cols: &IndexSet) -> RowDVector<f64> {
    RowDVector::from_iterator(cols.len(), cols.iter().map(|c| v[c]))
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `max - min` over the entries.
pub fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

pub fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.sum()).collect()
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}
