#![allow(dead_code)]

use nalgebra::DMatrix;
use polity_core::{DominatedMatrix, IndexSet, PoliticsMatrix, StochasticMatrix};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut r in m.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
}

/// Entries drawn from [0.1, 1], then rows normalized.
pub fn random_politics(rng: &mut ChaCha8Rng, n: usize) -> PoliticsMatrix {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..1.0));
    normalize_rows(&mut m);
    PoliticsMatrix::new(m).unwrap()
}

/// Nonnegative stochastic matrix with a planted zero pattern: either a
/// random sparse mask or a block lower-triangular mask over a random
/// ordering of persons.
pub fn random_dominated(rng: &mut ChaCha8Rng, n: usize) -> DominatedMatrix {
    let density = rng.random_range(0.15..0.6);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let blocks = rng.random_range(1..=n.min(4));
    let block_of: Vec<usize> = {
        let mut b = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            b[i] = pos * blocks / n;
        }
        b
    };
    let triangular = rng.random_bool(0.5);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let allowed = !triangular || block_of[j] <= block_of[i];
            if allowed && rng.random_bool(density) {
                m[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
        if m.row(i).sum() == 0.0 {
            let j = if triangular {
                *order.iter().find(|&&j| block_of[j] == block_of[i]).unwrap()
            } else {
                rng.random_range(0..n)
            };
            m[(i, j)] = rng.random_range(0.1..1.0);
        }
    }
    normalize_rows(&mut m);
    DominatedMatrix::new(m).unwrap()
}

/// `B` with zero row sums, positive wherever `Â` is zero, so that
/// `Â + εB` is a politics matrix for small `ε`.
pub fn random_correction(rng: &mut ChaCha8Rng, a: &DominatedMatrix) -> DMatrix<f64> {
    let n = a.matrix().nrows();
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..1.0));
    DMatrix::from_fn(n, n, |i, j| r[(i, j)] - r.row(i).sum() * a.matrix()[(i, j)])
}

/// Dominated matrix with exactly `q` planted upper-class families of
/// sizes 1 to 3 and at least `transient` further persons.
pub struct Planted {
    pub matrix: DominatedMatrix,
    pub families: Vec<IndexSet>,
    pub transient: IndexSet,
}

pub fn planted_families(rng: &mut ChaCha8Rng, q: usize, transient: usize) -> Planted {
    let sizes: Vec<usize> = (0..q).map(|_| rng.random_range(1..=3)).collect();
    let fam_total: usize = sizes.iter().sum();
    let extra = transient + rng.random_range(0..=2);
    let n = fam_total + extra;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut m = DMatrix::zeros(n, n);
    let mut families = Vec::new();
    let mut at = 0;
    for &s in &sizes {
        let members: Vec<usize> = perm[at..at + s].to_vec();
        at += s;
        for &i in &members {
            for &j in &members {
                m[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
        families.push(IndexSet::new(members));
    }
    let trans: Vec<usize> = perm[at..].to_vec();
    let fam_nodes: Vec<usize> = perm[..at].to_vec();
    for &i in &trans {
        for j in 0..n {
            if rng.random_bool(0.5) {
                m[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
        let f = *fam_nodes.choose(rng).unwrap();
        m[(i, f)] = rng.random_range(0.1..1.0);
    }
    normalize_rows(&mut m);
    Planted { matrix: DominatedMatrix::new(m).unwrap(), families, transient: IndexSet::new(trans) }
}

/// Random proper nonempty subset of `0..n`.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> IndexSet {
    loop {
        let s = IndexSet::new((0..n).filter(|_| rng.random_bool(0.5)));
        if !s.is_empty() && s.len() < n {
            return s;
        }
    }
}

/// Out-closed core of `set`: repeatedly drops members that listen outside.
pub fn closed_core(a: &DominatedMatrix, set: &IndexSet) -> IndexSet {
    let m = a.matrix();
    let n = m.nrows();
    let mut s: Vec<bool> = (0..n).map(|i| set.contains(i)).collect();
    loop {
        let drop = (0..n).find(|&i| s[i] && (0..n).any(|j| !s[j] && m[(i, j)] > 0.0));
        match drop {
            Some(i) => s[i] = false,
            None => break,
        }
    }
    IndexSet::new((0..n).filter(|&i| s[i]))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// The two four-person examples: voters {1,2}, candidates {3,4}. In the
/// second, voter 2 keeps `1 − ε` for themselves.
pub fn shared_listener_society() -> DominatedMatrix {
    DominatedMatrix::from_rows(&[
        vec![0.5, 0.0, 0.4, 0.1],
        vec![0.5, 0.0, 0.4, 0.1],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])
    .unwrap()
}

pub fn independent_listener_society(eps: f64) -> DominatedMatrix {
    DominatedMatrix::from_rows(&[
        vec![0.5, 0.0, 0.4, 0.1],
        vec![0.5 * eps, 1.0 - eps, 0.4 * eps, 0.1 * eps],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])
    .unwrap()
}
