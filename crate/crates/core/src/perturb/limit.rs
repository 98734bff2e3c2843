//! Limit support matrices `D̂_IJ = lim_{ε→0} D_IJ(Â + εB)` and the
//! consensus a family reaches when none of its members runs.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use super::expansion::{singular_inverse_expansion, SingularInverseExpansion};
use super::{block_stationary, check_correction};
use crate::election::{support_matrix, SupportMatrix};
use crate::error::{Error, Result};
use crate::families::{family_in_block, upper_class_families, Family};
use crate::index::{IndexPartition, IndexSet};
use crate::linalg;
use crate::matrix::{DominatedMatrix, StochasticMatrix};

/// Expansion of `(I − Â_II − εB_II)^{-1}`, present only when a family lies
/// inside the voter set.
pub fn voter_block_expansion(
    a: &DominatedMatrix,
    b: &DMatrix<f64>,
    voters: &IndexSet,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>, SingularInverseExpansion)>> {
    if family_in_block(a, voters).is_none() {
        return Ok(None);
    }
    let k = voters.len();
    let m = DMatrix::<f64>::identity(k, k) - a.block(voters, voters);
    let n = -linalg::submatrix(b, voters, voters);
    let e = singular_inverse_expansion(&m, &n)?;
    Ok(Some((m, n, e)))
}

/// `D̂_IJ`. Without a family inside `I` this is the plain support matrix of
/// `Â`; otherwise it is the `ε^0` coefficient of `(I − A_II)^{-1} A_IJ`
/// obtained from the singular-inverse expansion.
pub fn limit_support(a: &DominatedMatrix, b: &DMatrix<f64>, partition: &IndexPartition) -> Result<SupportMatrix> {
    check_correction(a, b)?;
    let (voters, candidates) = (partition.voters(), partition.candidates());
    match voter_block_expansion(a, b, voters)? {
        None => support_matrix(a, partition),
        Some((_, _, e)) => {
            // (W/ε + X0)(Â_IJ + εB_IJ) = W Â_IJ/ε + (W B_IJ + X0 Â_IJ) + O(ε);
            // U* Â_IJ = 0 because kernel vectors live on families.
            let hat_ij = a.block(voters, candidates);
            let b_ij = linalg::submatrix(b, voters, candidates);
            let d = &e.pole_term * b_ij + &e.regular_term * hat_ij;
            Ok(SupportMatrix::new(partition.clone(), d, false))
        }
    }
}

/// `c* = ω̂_F (B_FJ + B_FH D̂_HJ)` and its normalization `c̄*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consensus {
    pub family: Family,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Consensus of an upper-class family `F ⊆ I` with `H = I \ F`.
pub fn consensus(
    a: &DominatedMatrix,
    b: &DMatrix<f64>,
    family: &Family,
    partition: &IndexPartition,
) -> Result<Consensus> {
    check_correction(a, b)?;
    let voters = partition.voters();
    let candidates = partition.candidates();
    let f = family.members();
    let is_upper = upper_class_families(a).iter().any(|u| u == family);
    if !is_upper || !f.is_subset(voters) {
        return Err(Error::NotUpperClass { family: f.clone() });
    }
    let pi = RowDVector::from_vec(block_stationary(a, f)?);
    let mut inner = linalg::submatrix(b, f, candidates);
    let h = voters.difference(f);
    if !h.is_empty() {
        let sub = IndexPartition::new(partition.n(), h.clone(), candidates.clone())?;
        let d_hj = limit_support(a, b, &sub)?;
        inner += linalg::submatrix(b, f, &h) * d_hj.entries();
    }
    let raw: Vec<f64> = (&pi * inner).iter().copied().collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateConsensus);
    }
    let normalized = raw.iter().map(|c| c / total).collect();
    Ok(Consensus { family: family.clone(), raw, normalized })
}
