//! Small-ε machinery: `A = Â + εB` with `Âη = η` and `Bη = 0`.
//!
//! As `ε → 0` the power of `A` tends to the *dominated power* `ω̂*` of
//! `Â`, with first-order correction `σ*`. Support matrices tend to a
//! limit `D̂_IJ` that stays finite even when `I − Â_II` is singular.

mod expansion;
mod limit;

use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{upper_class_families, Family};
use crate::index::IndexSet;
use crate::linalg::{self, RANK_TOL};
use crate::matrix::{DominatedMatrix, PoliticsMatrix, StochasticMatrix};
use crate::power::{self, PowerVector};

pub use expansion::{
    singular_inverse_expansion, singular_inverse_expansion_with_tol, ExpansionResidual,
    SingularInverseExpansion,
};
pub use limit::{consensus, limit_support, voter_block_expansion, Consensus};

/// Default ε grid for the extrapolation oracle.
pub const ORACLE_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Row-sum tolerance for correction matrices.
const CORRECTION_TOL: f64 = 1e-9;

/// `(Â, ε, B)` with `Â + εB = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    dominated: DominatedMatrix,
    scale: f64,
    correction: DMatrix<f64>,
}

#[derive(Serialize)]
struct DecompositionJson {
    dominated: Vec<Vec<f64>>,
    scale: f64,
    correction: Vec<Vec<f64>>,
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionJson {
            dominated: linalg::to_rows(self.dominated.matrix()),
            scale: self.scale,
            correction: linalg::to_rows(&self.correction),
        }
        .serialize(s)
    }
}

impl Decomposition {
    pub fn new(dominated: DominatedMatrix, scale: f64, correction: DMatrix<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::BadParameters { reason: format!("scale {scale} must be positive") });
        }
        check_correction(&dominated, &correction)?;
        Ok(Decomposition { dominated, scale, correction })
    }

    pub fn dominated(&self) -> &DominatedMatrix {
        &self.dominated
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn correction(&self) -> &DMatrix<f64> {
        &self.correction
    }

    /// `Â + εB` at the recorded scale.
    pub fn compose(&self) -> DMatrix<f64> {
        self.at(self.scale)
    }

    /// `Â + eps·B`.
    pub fn at(&self, eps: f64) -> DMatrix<f64> {
        self.dominated.matrix() + &self.correction * eps
    }
}

/// Checks `Bη = 0` and `b_ij ≥ 0` wherever `â_ij = 0`.
pub fn check_correction(a: &DominatedMatrix, b: &DMatrix<f64>) -> Result<()> {
    if b.shape() != a.matrix().shape() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: b.nrows() });
    }
    let scale = linalg::max_abs(b).max(1.0);
    for (i, s) in linalg::row_sums(b).into_iter().enumerate() {
        if s.abs() > CORRECTION_TOL * scale {
            return Err(Error::InvalidCorrection { reason: format!("row {} sums to {s:e}", i + 1) });
        }
    }
    for i in 0..a.n() {
        for j in 0..a.n() {
            if !a.listens(i, j) && b[(i, j)] < 0.0 {
                return Err(Error::InvalidCorrection {
                    reason: format!("entry ({}, {}) is negative where Â is zero", i + 1, j + 1),
                });
            }
        }
    }
    Ok(())
}

/// Zeroes entries `≤ threshold`, spreads each row's removed mass
/// proportionally over its survivors, and sets `ε` to the largest removed
/// row mass (`threshold·n` with `B = 0` when nothing was removed).
pub fn decompose(a: &PoliticsMatrix, threshold: f64) -> Result<Decomposition> {
    let n = a.n();
    let max_entry = a.matrix().max();
    if !(threshold > 0.0 && threshold < 1.0 / n as f64 && threshold < max_entry) {
        return Err(Error::ThresholdTooLarge { threshold });
    }
    let mut hat = a.matrix().clone();
    let mut removed_max = 0.0_f64;
    for i in 0..n {
        let removed: f64 = (0..n).map(|j| a.entry(i, j)).filter(|&v| v <= threshold).sum();
        if removed >= 1.0 {
            return Err(Error::ThresholdTooLarge { threshold });
        }
        for j in 0..n {
            let v = a.entry(i, j);
            hat[(i, j)] = if v <= threshold { 0.0 } else { v / (1.0 - removed) };
        }
        removed_max = removed_max.max(removed);
    }
    let dominated = DominatedMatrix::new(hat)?;
    if removed_max == 0.0 {
        return Ok(Decomposition {
            dominated,
            scale: threshold * n as f64,
            correction: DMatrix::zeros(n, n),
        });
    }
    let correction = (a.matrix() - dominated.matrix()) / removed_max;
    Ok(Decomposition { dominated, scale: removed_max, correction })
}

/// Limit power `ω̂*` and first-order term `σ*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominatedPower {
    pub omega_hat: Vec<f64>,
    pub sigma: Vec<f64>,
    pub upper_class: Vec<Family>,
    /// Weight each upper-class family carries in `ω̂*`.
    pub mixing: Vec<f64>,
    /// Dimension of the solution space of `σ(I − Â) = ω̂B`, `ση = 0`
    /// before the second-order condition pins `σ` down.
    pub kernel_dim: usize,
}

/// Stationary distribution of an irreducible stochastic block.
pub(crate) fn block_stationary(a: &DominatedMatrix, block: &IndexSet) -> Result<Vec<f64>> {
    let sub = DominatedMatrix::new(a.block(block, block))?;
    Ok(power::power_explicit_pivot(&sub, 0)?.weights().to_vec())
}

/// Limit of `ω*(Â + εB)` as `ε → 0`, with its first-order correction.
///
/// Each upper-class family `U_k` carries its own stationary vector `π_k`.
/// With several families, their weights `α` solve `αC = 0` for the
/// aggregated generator `C_kl = π_k B v^(l)`, where `v^(l)` holds the
/// probabilities that the `Â`-chain ends in `U_l`. `σ*` is the solution of
/// `σ(I − Â) = ω̂B`, `ση = 0` that also satisfies the solvability
/// condition of the next order, which makes it the actual derivative.
pub fn dominated_power(a: &DominatedMatrix, b: &DMatrix<f64>) -> Result<DominatedPower> {
    check_correction(a, b)?;
    let n = a.n();
    let upper = upper_class_families(a);
    let q = upper.len();

    let mut pis = Vec::with_capacity(q);
    for f in &upper {
        let local = block_stationary(a, f.members())?;
        let mut full = RowDVector::zeros(n);
        for (k, i) in f.members().iter().enumerate() {
            full[i] = local[k];
        }
        pis.push(full);
    }

    let absorption = absorption_matrix(a, &upper)?;
    let coupling = DMatrix::from_fn(q, q, |k, l| (&pis[k] * b * absorption.column(l))[(0, 0)]);

    let mixing: Vec<f64> = if q == 1 {
        vec![1.0]
    } else {
        let kernel = linalg::left_null_space(&coupling, RANK_TOL);
        if kernel.nrows() != 1 {
            return Err(Error::AmbiguousMixing { dimension: kernel.nrows() });
        }
        let s = kernel.row(0).sum();
        kernel.row(0).iter().map(|x| (x / s).max(0.0)).collect()
    };

    let mut omega = RowDVector::zeros(n);
    for (w, pi) in mixing.iter().zip(&pis) {
        omega += pi * *w;
    }

    // particular solution of σ(I − Â) = ω̂B with ση = 0
    let id = DMatrix::<f64>::identity(n, n);
    let mut stacked = DMatrix::zeros(n + 1, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(&id - a.matrix()).transpose());
    stacked.row_mut(n).fill(1.0);
    let mut rhs = DMatrix::zeros(n + 1, 1);
    rhs.view_mut((0, 0), (n, 1)).copy_from(&(&omega * b).transpose());
    let mut sigma = linalg::min_norm_solve(&stacked, &rhs, RANK_TOL).transpose();

    if q > 1 {
        // β C = −σ_p B V, βη = 0
        let r = -(&sigma * b * &absorption);
        let mut sys = DMatrix::zeros(q + 1, q);
        sys.view_mut((0, 0), (q, q)).copy_from(&coupling.transpose());
        sys.row_mut(q).fill(1.0);
        let mut rr = DMatrix::zeros(q + 1, 1);
        rr.view_mut((0, 0), (q, 1)).copy_from(&r.transpose());
        let beta = linalg::min_norm_solve(&sys, &rr, RANK_TOL);
        for (k, pi) in pis.iter().enumerate() {
            sigma += pi * beta[(k, 0)];
        }
    }

    Ok(DominatedPower {
        omega_hat: omega.iter().copied().collect(),
        sigma: sigma.iter().copied().collect(),
        upper_class: upper,
        mixing,
        kernel_dim: q - 1,
    })
}

/// Column `l`: probability that the `Â`-chain started at each person ends
/// in upper-class family `l`.
fn absorption_matrix(a: &DominatedMatrix, upper: &[Family]) -> Result<DMatrix<f64>> {
    let n = a.n();
    let q = upper.len();
    let mut v = DMatrix::zeros(n, q);
    let mut owner = vec![None; n];
    for (l, f) in upper.iter().enumerate() {
        for i in f.members().iter() {
            v[(i, l)] = 1.0;
            owner[i] = Some(l);
        }
    }
    let transient = IndexSet::new((0..n).filter(|&i| owner[i].is_none()));
    if transient.is_empty() {
        return Ok(v);
    }
    let t = transient.len();
    let m = DMatrix::<f64>::identity(t, t) - a.block(&transient, &transient);
    let mut rhs = DMatrix::zeros(t, q);
    for (r, i) in transient.iter().enumerate() {
        for j in 0..n {
            if let Some(l) = owner[j] {
                rhs[(r, l)] += a.entry(i, j);
            }
        }
    }
    let sol = linalg::solve(&m, &rhs).ok_or(Error::SingularBlock)?;
    for (r, i) in transient.iter().enumerate() {
        for l in 0..q {
            v[(i, l)] = sol[(r, l)];
        }
    }
    Ok(v)
}

/// `ω*(Â + εB)` computed with the closed-form block solve.
pub fn power_at(a: &DominatedMatrix, b: &DMatrix<f64>, eps: f64) -> Result<PowerVector> {
    let m = PoliticsMatrix::new(a.matrix() + b * eps).map_err(|_| Error::InvalidAtEps { eps })?;
    power::power_explicit(&m)
}

/// Numerical oracle for `ω̂*`: evaluates `ω*(ε)` on `eps_list` and
/// extrapolates polynomially to `ε = 0`.
pub fn power_limit_oracle(a: &DominatedMatrix, b: &DMatrix<f64>, eps_list: &[f64]) -> Result<Vec<f64>> {
    if eps_list.is_empty() {
        return Err(Error::BadParameters { reason: "empty eps list".into() });
    }
    let samples: Vec<PowerVector> = eps_list
        .par_iter()
        .map(|&eps| power_at(a, b, eps))
        .collect::<Result<_>>()?;
    Ok((0..a.n())
        .map(|i| {
            let ys: Vec<f64> = samples.iter().map(|p| p.weights()[i]).collect();
            extrapolate_to_zero(eps_list, &ys)
        })
        .collect())
}

/// Neville's scheme for the interpolating polynomial through `(x_k, y_k)`,
/// evaluated at 0.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let k = xs.len();
    for m in 1..k {
        for i in 0..k - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

/// `‖ω*(ε) − ω̂* − εσ*‖∞` for each `ε`.
pub fn power_expansion_residuals(
    a: &DominatedMatrix,
    b: &DMatrix<f64>,
    dp: &DominatedPower,
    eps_list: &[f64],
) -> Result<Vec<ExpansionResidual>> {
    eps_list
        .iter()
        .map(|&eps| {
            let w = power_at(a, b, eps)?;
            let error = (0..a.n())
                .map(|i| (w.weights()[i] - dp.omega_hat[i] - eps * dp.sigma[i]).abs())
                .fold(0.0, f64::max);
            Ok(ExpansionResidual { eps, error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_row_example() {
        let a = PoliticsMatrix::from_rows(&[
            vec![0.495, 0.495, 0.01],
            vec![0.3, 0.3, 0.4],
            vec![0.2, 0.3, 0.5],
        ])
        .unwrap();
        let d = decompose(&a, 0.02).unwrap();
        let row: Vec<f64> = d.dominated().matrix().row(0).iter().copied().collect();
        assert!(linalg::max_abs_diff(&row, &[0.5, 0.5, 0.0]) < 1e-15);
        assert!((d.scale() - 0.01).abs() < 1e-15);
        assert!(linalg::max_abs(&(d.compose() - a.matrix())) < 1e-12);
        assert!(linalg::row_sums(d.correction()).iter().all(|s| s.abs() < 1e-12));
        assert!(d.correction()[(0, 2)] > 0.0);
    }

    #[test]
    fn decompose_without_removal() {
        let a = PoliticsMatrix::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let d = decompose(&a, 0.1).unwrap();
        assert_eq!(d.dominated().matrix(), a.matrix());
        assert_eq!(d.correction(), &DMatrix::zeros(2, 2));
        assert!((d.scale() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn decompose_rejects_large_threshold() {
        let a = PoliticsMatrix::uniform(3);
        assert!(matches!(decompose(&a, 0.4), Err(Error::ThresholdTooLarge { .. })));
        assert!(matches!(decompose(&a, 0.0), Err(Error::ThresholdTooLarge { .. })));
    }

    #[test]
    fn father_and_sons_power_is_leader() {
        let mut m = DMatrix::zeros(3, 3);
        m.column_mut(0).fill(1.0);
        let a = DominatedMatrix::new(m).unwrap();
        let b = DMatrix::from_row_slice(3, 3, &[-0.2, 0.1, 0.1, -0.3, 0.2, 0.1, -0.2, 0.1, 0.1]);
        let dp = dominated_power(&a, &b).unwrap();
        assert!(linalg::max_abs_diff(&dp.omega_hat, &[1.0, 0.0, 0.0]) < 1e-15);
        assert_eq!(dp.kernel_dim, 0);
    }

    #[test]
    fn symmetric_garden_pair() {
        let a = DominatedMatrix::identity(2);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let dp = dominated_power(&a, &b).unwrap();
        assert!(linalg::max_abs_diff(&dp.omega_hat, &[0.5, 0.5]) < 1e-14);
        assert!(linalg::max_abs_diff(&dp.sigma, &[0.0, 0.0]) < 1e-14);
        assert_eq!(dp.kernel_dim, 1);
        let oracle = power_limit_oracle(&a, &b, &ORACLE_EPS).unwrap();
        let err = linalg::max_abs_diff(&oracle, &[0.5, 0.5]);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn two_state_derivative() {
        // ω*(ε) = ((1 − ε/2)/(1 + ε/2), ε/(1 + ε/2)): ω̂ = (1, 0), σ = (−1, 1)
        let a = DominatedMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -0.5, 0.5]);
        let dp = dominated_power(&a, &b).unwrap();
        assert!(linalg::max_abs_diff(&dp.omega_hat, &[1.0, 0.0]) < 1e-15);
        assert!(linalg::max_abs_diff(&dp.sigma, &[-1.0, 1.0]) < 1e-12);
        let oracle = power_limit_oracle(&a, &b, &ORACLE_EPS).unwrap();
        assert!(linalg::max_abs_diff(&oracle, &dp.omega_hat) < 1e-6);
    }

    #[test]
    fn ambiguous_mixing_without_coupling() {
        let a = DominatedMatrix::identity(2);
        let b = DMatrix::zeros(2, 2);
        assert!(matches!(dominated_power(&a, &b), Err(Error::AmbiguousMixing { dimension: 2 })));
    }

    #[test]
    fn oracle_rejects_invalid_eps() {
        let a = DominatedMatrix::identity(2);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(matches!(power_limit_oracle(&a, &b, &[2.0]), Err(Error::InvalidAtEps { .. })));
    }

    #[test]
    fn neville_recovers_polynomial() {
        let f = |x: f64| 0.3 - 2.0 * x + 5.0 * x * x;
        let xs = [0.1, 0.05, 0.01];
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 0.3).abs() < 1e-13);
    }

    #[test]
    fn correction_checks() {
        let a = DominatedMatrix::identity(2);
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]);
        assert!(matches!(check_correction(&a, &bad), Err(Error::InvalidCorrection { .. })));
        let unbalanced = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -1.0]);
        assert!(check_correction(&a, &unbalanced).is_err());
    }
}
