use std::path::Path;

use nalgebra::DMatrix;
use polity_core::election::support_matrix;
use polity_core::families::{family_report, upper_class_families, ENUM_LIMIT};
use polity_core::io::{self, Format};
use polity_core::linalg;
use polity_core::perturb::{
    consensus, decompose, dominated_power, limit_support, power_expansion_residuals, power_limit_oracle,
    singular_inverse_expansion_with_tol, voter_block_expansion, Decomposition,
};
use polity_core::power::{
    contraction_bound, left_eigenvector, power_explicit, power_explicit_pivot, power_iterative, power_row_limit,
    PowerVector,
};
use polity_core::simulate::{simulate_joint, simulate_marginals};
use polity_core::structures::{self, gen_family_tree, uniform_garden_generator, TreeSpec};
use polity_core::{DominatedMatrix, IndexPartition, IndexSet, PoliticsMatrix, StochasticMatrix};
use serde_json::json;

use crate::report::{CliError, InputFile, Outcome};

pub const DEFAULT_THRESHOLD: f64 = 1e-3;
/// Largest ε used for residual tables when no fitted ε is smaller.
const DEFAULT_EPS: f64 = 1e-2;
/// Methods that disagree by more than this are reported.
const AGREEMENT_TOL: f64 = 1e-8;

enum Society {
    Strict(PoliticsMatrix),
    Relaxed(DominatedMatrix),
}

impl Society {
    fn from_matrix(m: DMatrix<f64>) -> Result<Self, CliError> {
        let d = DominatedMatrix::new(m)?;
        if d.matrix().min() > 0.0 {
            Ok(Society::Strict(PoliticsMatrix::new(d.into_inner())?))
        } else {
            Ok(Society::Relaxed(d))
        }
    }

    fn dominated(&self) -> DominatedMatrix {
        match self {
            Society::Strict(a) => a.to_dominated(),
            Society::Relaxed(d) => d.clone(),
        }
    }

    fn n(&self) -> usize {
        match self {
            Society::Strict(a) => a.n(),
            Society::Relaxed(d) => d.n(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Society::Strict(_) => "strict",
            Society::Relaxed(_) => "dominated",
        }
    }
}

fn load(path: &Path, format: Option<Format>) -> Result<(InputFile, DMatrix<f64>), CliError> {
    let file = InputFile::read(path)?;
    let m = io::parse(file.text()?, format.unwrap_or_else(|| Format::from_path(path)))?;
    Ok((file, m))
}

fn partition(n: usize, candidates: &[usize], voters: Option<&[usize]>) -> Result<IndexPartition, CliError> {
    let j = IndexSet::from_one_based(candidates.iter().copied())?;
    Ok(match voters {
        Some(v) => IndexPartition::new(n, IndexSet::from_one_based(v.iter().copied())?, j)?,
        None => IndexPartition::with_complement(n, j)?,
    })
}

fn enum_limit() -> Result<usize, CliError> {
    match std::env::var("POLITY_MAX_N") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("POLITY_MAX_N must be a nonnegative integer, got '{v}'"))),
        Err(_) => Ok(ENUM_LIMIT),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn power(path: &Path, format: Option<Format>, tol: f64) -> Result<Outcome, CliError> {
    let (file, m) = load(path, format)?;
    let society = Society::from_matrix(m)?;
    let mut diagnostics = Vec::new();
    let (omega, results) = match &society {
        Society::Strict(a) => {
            let it = power_iterative(a, tol)?;
            let ex = power_explicit(a)?;
            let rl = power_row_limit(a, tol)?;
            let agreement = it.max_abs_diff(&ex).max(it.max_abs_diff(&rl)).max(ex.max_abs_diff(&rl));
            let results = json!({
                "omega": it,
                "methods": { "iterative": it, "explicit": ex, "row_limit": rl },
                "agreement": agreement,
                "contraction": contraction_bound(a),
                "residual": it.residual(a),
            });
            if agreement > AGREEMENT_TOL {
                diagnostics.push(format!("power routes disagree by {agreement:e}"));
            }
            (it, results)
        }
        Society::Relaxed(d) => {
            let upper = upper_class_families(d);
            if upper.len() != 1 {
                let names: Vec<String> = upper.iter().map(|f| f.to_string()).collect();
                return Err(CliError::Invalid(format!(
                    "power vector is not unique: {} upper-class families {}",
                    upper.len(),
                    names.join(" ")
                )));
            }
            let ex = power_explicit_pivot(d, upper[0].members().as_slice()[0])?;
            let raw = left_eigenvector(d)?;
            let total: f64 = raw.iter().sum();
            let ev: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let agreement = linalg::max_abs_diff(ex.weights(), &ev);
            diagnostics.push("matrix has zero entries; iterative routes skipped".to_string());
            if agreement > AGREEMENT_TOL {
                diagnostics.push(format!("power routes disagree by {agreement:e}"));
            }
            let results = json!({
                "omega": ex,
                "methods": { "explicit": ex, "eigenvector": ev },
                "agreement": agreement,
                "residual": ex.residual(d),
            });
            (ex, results)
        }
    };
    let summary = format!("omega = {}\n", fmt_vec(PowerVector::weights(&omega)));
    Ok(Outcome {
        inputs: vec![file.digest()],
        parameters: json!({ "tol": tol, "matrix_kind": society.kind(), "n": society.n() }),
        results,
        diagnostics,
        summary,
    })
}

pub fn elect(
    path: &Path,
    format: Option<Format>,
    candidates: &[usize],
    voters: Option<&[usize]>,
    cond_limit: f64,
) -> Result<Outcome, CliError> {
    let (file, m) = load(path, format)?;
    let society = Society::from_matrix(m)?;
    let a = society.dominated();
    let p = partition(a.n(), candidates, voters)?;
    let d = support_matrix(&a, &p)?;
    let k = p.voters().len();
    let cond = linalg::condition_number(&(DMatrix::identity(k, k) - a.block(p.voters(), p.voters())));
    let near_singular = cond > cond_limit;
    let mut diagnostics = Vec::new();
    if near_singular {
        diagnostics.push(format!("voter block is near-singular (condition {cond:e})"));
    }
    let mut summary = String::new();
    for (v, row) in p.voters().iter().zip(d.entries().row_iter()) {
        let r: Vec<f64> = row.iter().copied().collect();
        summary.push_str(&format!("person {}: {}\n", v + 1, fmt_vec(&r)));
    }
    Ok(Outcome {
        inputs: vec![file.digest()],
        parameters: json!({
            "candidates": p.candidates(),
            "voters": p.voters(),
            "cond_limit": cond_limit,
            "matrix_kind": society.kind(),
        }),
        results: json!({
            "voters": p.voters(),
            "candidates": p.candidates(),
            "rows": linalg::to_rows(d.entries()),
            "row_sums": d.row_sums(),
            "condition": cond,
            "near_singular": near_singular,
        }),
        diagnostics,
        summary,
    })
}

/// Splits a strict matrix at `threshold`; a matrix that already has zeros
/// is taken as the dominated part itself.
fn dominated_part(society: &Society, threshold: f64) -> Result<(DominatedMatrix, Option<Decomposition>), CliError> {
    match society {
        Society::Strict(a) => {
            let dec = decompose(a, threshold)?;
            Ok((dec.dominated().clone(), Some(dec)))
        }
        Society::Relaxed(d) => Ok((d.clone(), None)),
    }
}

pub fn families(path: &Path, format: Option<Format>, threshold: f64) -> Result<Outcome, CliError> {
    let (file, m) = load(path, format)?;
    let society = Society::from_matrix(m)?;
    let (a, decomposition) = dominated_part(&society, threshold)?;
    let limit = enum_limit()?;
    let report = family_report(&a, limit);
    let mut diagnostics = Vec::new();
    if decomposition.is_none() {
        diagnostics.push("matrix already has zero entries; threshold not applied".to_string());
    }
    if report.families.is_none() {
        diagnostics.push(format!(
            "family listing skipped: more than {limit} strongly connected components (set POLITY_MAX_N to raise)"
        ));
    }
    let upper: Vec<String> = report.upper_class.iter().map(|f| f.to_string()).collect();
    let summary = format!(
        "{} families; upper class {}; {}\n",
        report.families.as_ref().map_or("unlisted".to_string(), |f| f.len().to_string()),
        upper.join(" "),
        if report.connected { "connected" } else { "disconnected" }
    );
    Ok(Outcome {
        inputs: vec![file.digest()],
        parameters: json!({ "threshold": threshold, "enumeration_limit": limit, "matrix_kind": society.kind() }),
        results: json!({
            "decomposition": decomposition,
            "dominated": linalg::to_rows(a.matrix()),
            "family_count": report.families.as_ref().map(|f| f.len()),
            "families": report.families,
            "upper_class": report.upper_class,
            "connected": report.connected,
        }),
        diagnostics,
        summary,
    })
}

pub struct PerturbRequest<'a> {
    pub matrix: &'a Path,
    pub format: Option<Format>,
    pub candidates: Option<&'a [usize]>,
    pub voters: Option<&'a [usize]>,
    pub threshold: f64,
    pub correction: Option<&'a Path>,
    pub rank_tol: f64,
    pub eps: Option<&'a [f64]>,
}

pub fn perturb(req: &PerturbRequest) -> Result<Outcome, CliError> {
    let (file, m) = load(req.matrix, req.format)?;
    let mut inputs = vec![file.digest()];
    let society = Society::from_matrix(m)?;
    let n = society.n();
    let mut diagnostics = Vec::new();
    let (a, b, decomposition) = match (req.correction, &society) {
        (Some(path), _) => {
            let (bf, b) = load(path, None)?;
            inputs.push(bf.digest());
            (society.dominated(), b, None)
        }
        (None, Society::Strict(_)) => {
            let (a, dec) = dominated_part(&society, req.threshold)?;
            let dec = dec.expect("strict input is decomposed");
            (a, dec.correction().clone(), Some(dec))
        }
        (None, Society::Relaxed(d)) => {
            diagnostics.push("no correction given; using uniform mixing B = 1/n - A".to_string());
            let b = DMatrix::from_element(n, n, 1.0 / n as f64) - d.matrix();
            (d.clone(), b, None)
        }
    };
    let fitted = decomposition.as_ref().map(|d| d.scale());
    let base = fitted.unwrap_or(DEFAULT_EPS).min(DEFAULT_EPS);
    let grid: Vec<f64> = match req.eps {
        Some(e) => e.to_vec(),
        None => vec![base, base / 3.0, base / 10.0],
    };
    let oracle_grid = [base / 10.0, base / 100.0, base / 1000.0];

    let dp = dominated_power(&a, &b)?;
    let oracle = power_limit_oracle(&a, &b, &oracle_grid)?;
    let oracle_diff = linalg::max_abs_diff(&oracle, &dp.omega_hat);
    if oracle_diff > 1e-6 {
        diagnostics.push(format!("dominated power differs from extrapolation by {oracle_diff:e}"));
    }
    let residuals = power_expansion_residuals(&a, &b, &dp, &grid)?;
    let mut summary = format!("omega_hat = {}\n", fmt_vec(&dp.omega_hat));

    let election = match req.candidates {
        None => serde_json::Value::Null,
        Some(c) => {
            let p = partition(n, c, req.voters)?;
            let d_hat = limit_support(&a, &b, &p)?;
            let mut consensuses = Vec::new();
            for f in upper_class_families(&a).iter().filter(|f| f.members().is_subset(p.voters())) {
                let c = consensus(&a, &b, f, &p)?;
                summary.push_str(&format!("consensus of {}: {}\n", f, fmt_vec(&c.normalized)));
                consensuses.push(c);
            }
            let expansion = match voter_block_expansion(&a, &b, p.voters())? {
                None => serde_json::Value::Null,
                Some((mm, nn, _)) => {
                    let e = singular_inverse_expansion_with_tol(&mm, &nn, req.rank_tol)?;
                    let pivots: Vec<usize> = e.pivot_set.iter().map(|i| p.voters().as_slice()[i] + 1).collect();
                    json!({
                        "nullity": e.nullity(),
                        "pivot_set": pivots,
                        "residuals": e.residual_table(&mm, &nn, &grid)?,
                    })
                }
            };
            let at_fitted = match &decomposition {
                Some(dec) => {
                    let full = PoliticsMatrix::new(dec.compose())?;
                    let d = support_matrix(&full, &p)?;
                    Some(linalg::max_abs(&(d.entries() - d_hat.entries())))
                }
                None => None,
            };
            for (v, row) in p.voters().iter().zip(d_hat.entries().row_iter()) {
                let r: Vec<f64> = row.iter().copied().collect();
                summary.push_str(&format!("limit support of person {}: {}\n", v + 1, fmt_vec(&r)));
            }
            json!({
                "voters": p.voters(),
                "candidates": p.candidates(),
                "limit_support": linalg::to_rows(d_hat.entries()),
                "consensus": consensuses,
                "voter_block_expansion": expansion,
                "deviation_at_fitted_eps": at_fitted,
            })
        }
    };

    Ok(Outcome {
        inputs,
        parameters: json!({
            "threshold": decomposition.as_ref().map(|_| req.threshold),
            "rank_tol": req.rank_tol,
            "eps_grid": grid,
            "oracle_eps": oracle_grid,
            "candidates": req.candidates,
            "voters": req.voters,
            "matrix_kind": society.kind(),
        }),
        results: json!({
            "decomposition": decomposition,
            "correction": linalg::to_rows(&b),
            "omega_hat": dp.omega_hat,
            "sigma": dp.sigma,
            "upper_class": dp.upper_class,
            "mixing": dp.mixing,
            "kernel_dim": dp.kernel_dim,
            "oracle": { "omega_hat": oracle, "max_diff": oracle_diff },
            "power_residuals": residuals,
            "election": election,
        }),
        diagnostics,
        summary,
    })
}

pub fn simulate(
    path: &Path,
    format: Option<Format>,
    candidates: &[usize],
    voters: Option<&[usize]>,
    trials: u64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (file, m) = load(path, format)?;
    let society = Society::from_matrix(m)?;
    let a = society.dominated();
    let p = partition(a.n(), candidates, voters)?;
    let walks = simulate_marginals(&a, &p, trials, seed)?;
    let joint = simulate_joint(&a, &p, trials, seed)?;
    let mut results = serde_json::to_value(&joint).expect("simulation result serializes");
    results["marginal"] = json!(walks.marginal());
    results["joint_marginal"] = json!(joint.marginal());
    let mut diagnostics = Vec::new();
    if joint.unresolved > 0 {
        diagnostics.push(format!("{} delegation cycles among voters were redrawn", joint.unresolved));
    }
    let mut summary = String::new();
    for (v, row) in p.voters().iter().zip(walks.marginal()) {
        summary.push_str(&format!("person {}: {}\n", v + 1, fmt_vec(&row)));
    }
    Ok(Outcome {
        inputs: vec![file.digest()],
        parameters: json!({
            "candidates": p.candidates(),
            "voters": p.voters(),
            "trials": trials,
            "seed": seed,
        }),
        results,
        diagnostics,
        summary,
    })
}

pub fn gen_father_and_sons(k: usize, leader_row: Option<&[f64]>) -> Result<DMatrix<f64>, CliError> {
    Ok(structures::gen_father_and_sons(k, leader_row)?.into_inner())
}

pub fn gen_tree(parents: &[usize]) -> Result<DMatrix<f64>, CliError> {
    Ok(gen_family_tree(&TreeSpec::from_one_based(parents)?).into_inner())
}

pub fn gen_equality(k: usize, s: f64) -> Result<DMatrix<f64>, CliError> {
    Ok(structures::gen_equality(k, s)?.into_inner())
}

pub fn gen_garden(
    n: Option<usize>,
    correction: Option<&Path>,
    format: Option<Format>,
    eps: f64,
) -> Result<DMatrix<f64>, CliError> {
    let b = match correction {
        Some(path) => {
            let (_, b) = load(path, format)?;
            if let Some(n) = n.filter(|&n| n != b.nrows()) {
                return Err(CliError::Invalid(format!("--n {n} does not match the {}-row correction", b.nrows())));
            }
            b
        }
        None => uniform_garden_generator(n.expect("clap requires --n without --correction")),
    };
    Ok(structures::gen_garden(&b, eps)?.into_inner())
}
