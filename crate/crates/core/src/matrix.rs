//! Validated matrix types.
//!
//! A *politics matrix* is strictly positive and row-stochastic: entry
//! `(i, j)` is the probability that person `i` listens to person `j`. A
//! *dominated* matrix relaxes positivity to nonnegativity, and its zero
//! pattern carries the family structure. Submatrix blocks are
//! nonnegative with every row sum strictly below one.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg;

/// Row-sum tolerance applied at ingestion.
pub const ROW_TOL: f64 = 1e-9;
/// Margin by which submatrix row sums must stay below one.
pub const SUB_TOL: f64 = 1e-12;
/// Entries of dominated matrices below this magnitude are structural zeros.
pub const EXACT_ZERO_TOL: f64 = 1e-14;

/// Common view of the two row-stochastic matrix types.
pub trait StochasticMatrix {
    fn matrix(&self) -> &DMatrix<f64>;

    fn n(&self) -> usize {
        self.matrix().nrows()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix()[(i, j)]
    }

    fn block(&self, rows: &IndexSet, cols: &IndexSet) -> DMatrix<f64> {
        linalg::submatrix(self.matrix(), rows, cols)
    }

    /// Same entries viewed through the relaxed (nonnegative) type.
    fn to_dominated(&self) -> DominatedMatrix {
        DominatedMatrix(self.matrix().clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Politics,
    Dominated,
    Submatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validated {
    Politics(PoliticsMatrix),
    Dominated(DominatedMatrix),
    Submatrix(SubmatrixBlock),
}

/// Checks `raw` against the invariants of `kind` and returns the typed value.
pub fn validate(raw: &DMatrix<f64>, kind: MatrixKind) -> Result<Validated> {
    Ok(match kind {
        MatrixKind::Politics => Validated::Politics(PoliticsMatrix::new(raw.clone())?),
        MatrixKind::Dominated => Validated::Dominated(DominatedMatrix::new(raw.clone())?),
        MatrixKind::Submatrix => Validated::Submatrix(SubmatrixBlock::new(
            IndexSet::full(raw.nrows()),
            IndexSet::full(raw.ncols()),
            raw.clone(),
        )?),
    })
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.is_empty() {
        return Err(Error::Empty);
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

fn check_nonnegative(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    Ok(())
}

/// Checks unit row sums, then divides each row by its sum.
fn normalize_rows(m: &mut DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let s = m.row(i).sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::RowSumViolation { row: i, deviation: s - 1.0 });
        }
        m.row_mut(i).unscale_mut(s);
    }
    Ok(())
}

/// Strictly positive row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PoliticsMatrix(DMatrix<f64>);

impl PoliticsMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        check_square(&m)?;
        check_nonnegative(&m)?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] <= 0.0 {
                    return Err(Error::NonPositiveEntry { row: i, col: j, value: m[(i, j)] });
                }
            }
        }
        normalize_rows(&mut m)?;
        Ok(PoliticsMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        PoliticsMatrix::new(rows_to_matrix(rows)?)
    }

    /// Uniform matrix with every entry `1/n`.
    pub fn uniform(n: usize) -> Self {
        PoliticsMatrix(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// The diagonal block `A_II`, which is a politics submatrix whenever `I`
    /// is a proper subset.
    pub fn voter_block(&self, voters: &IndexSet) -> Result<SubmatrixBlock> {
        SubmatrixBlock::new(voters.clone(), voters.clone(), self.block(voters, voters))
    }
}

impl StochasticMatrix for PoliticsMatrix {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Nonnegative row-stochastic matrix with exact structural zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct DominatedMatrix(DMatrix<f64>);

impl DominatedMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        check_square(&m)?;
        m.apply(|v| {
            if v.abs() < EXACT_ZERO_TOL {
                *v = 0.0
            }
        });
        check_nonnegative(&m)?;
        normalize_rows(&mut m)?;
        Ok(DominatedMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        DominatedMatrix::new(rows_to_matrix(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        DominatedMatrix(DMatrix::identity(n, n))
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Strict version, when every entry happens to be positive.
    pub fn to_politics(&self) -> Result<PoliticsMatrix> {
        PoliticsMatrix::new(self.0.clone())
    }

    /// True when `(i, j)` is a listening edge (a structurally nonzero entry).
    pub fn listens(&self, i: usize, j: usize) -> bool {
        self.0[(i, j)] > 0.0
    }
}

impl StochasticMatrix for DominatedMatrix {
    fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Nonnegative block `M` with `M η < 1` row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmatrixBlock {
    rows: IndexSet,
    cols: IndexSet,
    entries: DMatrix<f64>,
}

impl SubmatrixBlock {
    pub fn new(rows: IndexSet, cols: IndexSet, entries: DMatrix<f64>) -> Result<Self> {
        check_finite(&entries)?;
        if entries.nrows() != rows.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: entries.nrows() });
        }
        if entries.ncols() != cols.len() {
            return Err(Error::DimensionMismatch { expected: cols.len(), found: entries.ncols() });
        }
        check_nonnegative(&entries)?;
        for (i, s) in linalg::row_sums(&entries).into_iter().enumerate() {
            if s >= 1.0 - SUB_TOL {
                return Err(Error::RowSumViolation { row: i, deviation: s - 1.0 });
            }
        }
        Ok(SubmatrixBlock { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows_to_matrix(rows)?;
        SubmatrixBlock::new(IndexSet::full(m.nrows()), IndexSet::full(m.ncols()), m)
    }

    pub fn rows(&self) -> &IndexSet {
        &self.rows
    }

    pub fn cols(&self) -> &IndexSet {
        &self.cols
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.entries.is_square()
    }

    /// Largest row sum; strictly below one by construction.
    pub fn max_row_sum(&self) -> f64 {
        linalg::row_sums(&self.entries).into_iter().fold(0.0, f64::max)
    }
}

/// `Ā = A - I`: zero row sums, nonnegative off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix(DMatrix<f64>);

impl CenteredMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// `A - I`.
pub fn centered<M: StochasticMatrix>(a: &M) -> CenteredMatrix {
    let n = a.n();
    CenteredMatrix(a.matrix() - DMatrix::<f64>::identity(n, n))
}

/// Multiplies row `i` of `Ā` by `weights[i]`.
pub fn row_rescale(centered: &CenteredMatrix, weights: &[f64]) -> Result<CenteredMatrix> {
    if weights.len() != centered.n() {
        return Err(Error::DimensionMismatch { expected: centered.n(), found: weights.len() });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let mut m = centered.0.clone();
    for (i, w) in weights.iter().enumerate() {
        m.row_mut(i).scale_mut(*w);
    }
    Ok(CenteredMatrix(m))
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = rows.first().map(Vec::len).ok_or(Error::Empty)?;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Ragged { row: i, found: r.len(), expected: cols });
        }
    }
    Ok(linalg::from_rows(rows))
}
