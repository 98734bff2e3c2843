//! Support matrices.
//!
//! With candidates `J` pinned to themselves and voters `I` exchanging
//! opinions, voter `i` ends up supporting candidate `j` with probability
//! `D_IJ = (I − A_II)^{-1} A_IJ`. This is also the absorption
//! probability of the listening chain into `J`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::family_in_block;
use crate::index::{IndexPartition, IndexSet};
use crate::linalg::{self, NEAR_SINGULAR_COND, RANK_TOL};
use crate::matrix::{CenteredMatrix, StochasticMatrix, SubmatrixBlock, ROW_TOL};

/// `D_IJ` together with the partition it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMatrix {
    partition: IndexPartition,
    entries: DMatrix<f64>,
    near_singular: bool,
}

#[derive(Serialize)]
struct SupportJson<'a> {
    voters: &'a IndexSet,
    candidates: &'a IndexSet,
    rows: Vec<Vec<f64>>,
    near_singular: bool,
}

impl Serialize for SupportMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SupportJson {
            voters: self.partition.voters(),
            candidates: self.partition.candidates(),
            rows: linalg::to_rows(&self.entries),
            near_singular: self.near_singular,
        }
        .serialize(s)
    }
}

impl SupportMatrix {
    pub(crate) fn new(partition: IndexPartition, entries: DMatrix<f64>, near_singular: bool) -> Self {
        SupportMatrix { partition, entries, near_singular }
    }

    pub fn partition(&self) -> &IndexPartition {
        &self.partition
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Set when the voter-block solve had condition estimate above 1e12.
    pub fn near_singular(&self) -> bool {
        self.near_singular
    }

    /// Support that voter `i` (0-based person) gives candidate `j`.
    pub fn get(&self, voter: usize, candidate: usize) -> Option<f64> {
        let r = self.partition.voters().position(voter)?;
        let c = self.partition.candidates().position(candidate)?;
        Some(self.entries[(r, c)])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        linalg::row_sums(&self.entries)
    }

    /// Largest deviation of a row sum from one.
    pub fn stochastic_defect(&self) -> f64 {
        self.row_sums().iter().fold(0.0, |m, s| m.max((s - 1.0).abs()))
    }
}

/// `D_IJ` for a politics or dominated matrix.
///
/// For dominated inputs a family inside the voter set makes `I − Â_II`
/// singular; that family is returned in the error.
pub fn support_matrix<M: StochasticMatrix>(a: &M, partition: &IndexPartition) -> Result<SupportMatrix> {
    if partition.n() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: partition.n() });
    }
    let (voters, candidates) = (partition.voters(), partition.candidates());
    let dominated = a.to_dominated();
    if let Some(f) = family_in_block(&dominated, voters) {
        return Err(Error::SingularVoterBlock { family: f.into_members() });
    }
    let k = voters.len();
    let m = DMatrix::<f64>::identity(k, k) - a.block(voters, voters);
    let mut d = linalg::solve(&m, &a.block(voters, candidates)).ok_or(Error::SingularBlock)?;
    apply_reachability_zeros(a, voters, candidates, &mut d);
    let near_singular = linalg::condition_number(&m) > NEAR_SINGULAR_COND;
    Ok(SupportMatrix::new(partition.clone(), d, near_singular))
}

/// Support that no listening path can carry is exactly zero.
pub(crate) fn apply_reachability_zeros<M: StochasticMatrix>(
    a: &M,
    voters: &IndexSet,
    candidates: &IndexSet,
    d: &mut DMatrix<f64>,
) {
    let k = voters.len();
    // reach[r][s]: voter s is reachable from voter r through voters
    let mut reach = vec![vec![false; k]; k];
    for (r, row) in reach.iter_mut().enumerate() {
        row[r] = true;
        let mut stack = vec![r];
        while let Some(s) = stack.pop() {
            for t in 0..k {
                if !row[t] && a.entry(voters.as_slice()[s], voters.as_slice()[t]) > 0.0 {
                    row[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    for r in 0..k {
        for (c, j) in candidates.iter().enumerate() {
            let carried = (0..k).any(|s| reach[r][s] && a.entry(voters.as_slice()[s], j) > 0.0);
            if !carried {
                d[(r, c)] = 0.0;
            }
        }
    }
}

/// `(I − M)^{-1} A_IJ` from explicit blocks.
pub fn support_from_blocks(voter_block: &SubmatrixBlock, candidate_block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !voter_block.is_square() {
        return Err(Error::NonSquare {
            rows: voter_block.entries().nrows(),
            cols: voter_block.entries().ncols(),
        });
    }
    let k = voter_block.entries().nrows();
    if candidate_block.nrows() != k {
        return Err(Error::DimensionMismatch { expected: k, found: candidate_block.nrows() });
    }
    let m = DMatrix::<f64>::identity(k, k) - voter_block.entries();
    linalg::solve(&m, candidate_block).ok_or(Error::SingularBlock)
}

/// `−C_II^{-1} C_IJ` for a centered (possibly row-rescaled) matrix.
pub fn support_from_centered(c: &CenteredMatrix, partition: &IndexPartition) -> Result<DMatrix<f64>> {
    let (voters, candidates) = (partition.voters(), partition.candidates());
    let cii = linalg::submatrix(c.matrix(), voters, voters);
    let cij = linalg::submatrix(c.matrix(), voters, candidates);
    linalg::solve(&cii, &cij).map(|x| -x).ok_or(Error::SingularBlock)
}

/// `(I − M)^{-1} = Σ M^i`, summed until the tail is provably below `tol`.
pub fn neumann_inverse(m: &SubmatrixBlock, tol: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotSubstochastic);
    }
    let rho = m.max_row_sum();
    if rho >= 1.0 {
        return Err(Error::NotSubstochastic);
    }
    let k = m.entries().nrows();
    let mut term = DMatrix::<f64>::identity(k, k);
    let mut sum = term.clone();
    // ‖Σ_{i>l} M^i‖∞ ≤ ‖M^{l+1} η‖∞ / (1 − ρ)
    loop {
        term = &term * m.entries();
        let mass = linalg::row_sums(&term).into_iter().fold(0.0, f64::max);
        if mass == 0.0 {
            break;
        }
        sum += &term;
        if mass * rho / (1.0 - rho) < tol {
            break;
        }
    }
    Ok(sum)
}

/// Support in the near-identity society `A = I + εB`: `−B_II^{-1} B_IJ`,
/// independent of `ε`.
pub fn garden_support(b: &DMatrix<f64>, partition: &IndexPartition) -> Result<SupportMatrix> {
    garden_support_with_tol(b, partition, RANK_TOL)
}

pub fn garden_support_with_tol(
    b: &DMatrix<f64>,
    partition: &IndexPartition,
    rank_tol: f64,
) -> Result<SupportMatrix> {
    check_generator(b)?;
    if b.nrows() != partition.n() {
        return Err(Error::DimensionMismatch { expected: partition.n(), found: b.nrows() });
    }
    let (voters, candidates) = (partition.voters(), partition.candidates());
    let bii = linalg::submatrix(b, voters, voters);
    if linalg::is_singular(&bii, rank_tol) {
        return Err(Error::SingularBlock);
    }
    let bij = linalg::submatrix(b, voters, candidates);
    let d = linalg::solve(&bii, &bij).map(|x| -x).ok_or(Error::SingularBlock)?;
    let near = linalg::condition_number(&bii) > NEAR_SINGULAR_COND;
    Ok(SupportMatrix::new(partition.clone(), d, near))
}

/// Square, zero row sums, nonnegative off-diagonal.
pub(crate) fn check_generator(b: &DMatrix<f64>) -> Result<()> {
    if !b.is_square() {
        return Err(Error::NonSquare { rows: b.nrows(), cols: b.ncols() });
    }
    let scale = linalg::max_abs(b).max(1.0);
    for (i, s) in linalg::row_sums(b).into_iter().enumerate() {
        if s.abs() > ROW_TOL * scale {
            return Err(Error::InvalidCorrection { reason: format!("row {} sums to {s:e}", i + 1) });
        }
    }
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            if i != j && b[(i, j)] < 0.0 {
                return Err(Error::InvalidCorrection {
                    reason: format!("off-diagonal entry ({}, {}) is negative", i + 1, j + 1),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{centered, row_rescale, DominatedMatrix, PoliticsMatrix};

    fn case_one() -> DominatedMatrix {
        DominatedMatrix::from_rows(&[
            vec![0.5, 0.0, 0.4, 0.1],
            vec![0.5, 0.0, 0.4, 0.1],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap()
    }

    fn partition() -> IndexPartition {
        IndexPartition::with_complement(4, IndexSet::new([2, 3])).unwrap()
    }

    #[test]
    fn case_one_support() {
        let d = support_matrix(&case_one(), &partition()).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.8, 0.2]);
        assert!(linalg::max_abs(&(d.entries() - expect)) < 1e-15);
        assert!(d.stochastic_defect() < 1e-15);
        assert!(!d.near_singular());
    }

    #[test]
    fn case_two_support_ignores_eps() {
        for eps in [1e-1, 1e-2, 1e-4] {
            let block = SubmatrixBlock::from_rows(&[vec![0.5, 0.0], vec![0.5 * eps, 1.0 - eps]]).unwrap();
            let aij = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.4 * eps, 0.1 * eps]);
            let d = support_from_blocks(&block, &aij).unwrap();
            let expect = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.8, 0.2]);
            assert!(linalg::max_abs(&(d - expect)) < 1e-12, "eps {eps}");
        }
    }

    #[test]
    fn single_voter_is_scalar() {
        let block = SubmatrixBlock::from_rows(&[vec![0.5]]).unwrap();
        let d = support_from_blocks(&block, &DMatrix::from_row_slice(1, 2, &[0.4, 0.1])).unwrap();
        assert!((d[(0, 0)] - 0.8).abs() < 1e-15 && (d[(0, 1)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn neumann_examples() {
        let s = neumann_inverse(&SubmatrixBlock::from_rows(&[vec![0.5]]).unwrap(), 1e-14).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-13);
        let z = neumann_inverse(&SubmatrixBlock::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap(), 1e-14)
            .unwrap();
        assert_eq!(z, DMatrix::identity(2, 2));
        let m = SubmatrixBlock::from_rows(&[vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        let s = neumann_inverse(&m, 1e-14).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        assert!(linalg::max_abs(&(s - expect)) < 1e-13);
    }

    #[test]
    fn neumann_rejects_rectangular() {
        let m = SubmatrixBlock::from_rows(&[vec![0.1, 0.2, 0.3]]).unwrap();
        assert!(matches!(neumann_inverse(&m, 1e-12), Err(Error::NotSubstochastic)));
    }

    #[test]
    fn garden_example_and_scale_invariance() {
        let b = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 0.5, 0.5, 0.0, //
                0.5, -1.0, 0.0, 0.5, //
                0.2, 0.3, -0.6, 0.1, //
                0.1, 0.1, 0.1, -0.3,
            ],
        );
        let p = partition();
        let d = garden_support(&b, &p).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!(linalg::max_abs(&(d.entries() - &expect)) < 1e-15);
        let scaled = garden_support(&(b.clone() * 7.5), &p).unwrap();
        assert!(linalg::max_abs(&(scaled.entries() - &expect)) < 1e-15);
        for eps in [1e-1, 1e-3] {
            let a = DominatedMatrix::new(DMatrix::identity(4, 4) + &b * eps).unwrap();
            let s = support_matrix(&a, &p).unwrap();
            assert!(linalg::max_abs(&(s.entries() - &expect)) < 1e-9);
        }
    }

    #[test]
    fn garden_rejects_bad_generators() {
        let p = IndexPartition::with_complement(2, IndexSet::new([1])).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 1.0, -1.0]);
        assert!(matches!(garden_support(&bad, &p), Err(Error::InvalidCorrection { .. })));
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
        assert!(matches!(garden_support(&neg, &p), Err(Error::InvalidCorrection { .. })));
        let zero = DMatrix::zeros(2, 2);
        assert!(matches!(garden_support(&zero, &p), Err(Error::SingularBlock)));
    }

    #[test]
    fn singular_voter_block_names_family() {
        // Person 1 listens only to person 2 and vice versa: {1, 2} is a family.
        let a = DominatedMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let p = IndexPartition::with_complement(3, IndexSet::new([2])).unwrap();
        match support_matrix(&a, &p) {
            Err(Error::SingularVoterBlock { family }) => assert_eq!(family, IndexSet::new([0, 1])),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rescaled_centered_matrix_keeps_support() {
        let a = PoliticsMatrix::from_rows(&[
            vec![0.2, 0.3, 0.5],
            vec![0.1, 0.1, 0.8],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let p = IndexPartition::with_complement(3, IndexSet::new([2])).unwrap();
        let base = support_matrix(&a, &p).unwrap();
        let c = row_rescale(&centered(&a), &[3.0, 0.25, 9.0]).unwrap();
        let d = support_from_centered(&c, &p).unwrap();
        assert!(linalg::max_abs(&(d - base.entries())) < 1e-14);
    }

    #[test]
    fn serializes_one_based() {
        let d = support_matrix(&case_one(), &partition()).unwrap();
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["candidates"], serde_json::json!([3, 4]));
        assert_eq!(v["voters"], serde_json::json!([1, 2]));
        assert_eq!(d.get(1, 3), Some(d.entries()[(1, 1)]));
    }
}
