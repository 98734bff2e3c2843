//! Generators for archetypal societies.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::election::check_generator;
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::matrix::{DominatedMatrix, PoliticsMatrix, ROW_TOL};

/// Everyone listens to person 1. With `leader_row`, the leader instead
/// listens across the family according to that distribution.
pub fn gen_father_and_sons(k: usize, leader_row: Option<&[f64]>) -> Result<DominatedMatrix> {
    if k == 0 {
        return Err(Error::BadParameters { reason: "family size must be at least 1".into() });
    }
    let mut m = DMatrix::zeros(k, k);
    m.column_mut(0).fill(1.0);
    if let Some(row) = leader_row {
        if row.len() != k {
            return Err(Error::BadDistribution {
                reason: format!("leader row has {} entries, expected {k}", row.len()),
            });
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::BadDistribution { reason: "entries must be finite and nonnegative".into() });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::BadDistribution { reason: format!("leader row sums to {s}") });
        }
        for (j, v) in row.iter().enumerate() {
            m[(0, j)] = *v;
        }
    }
    DominatedMatrix::new(m)
}

/// Parent links of a reporting tree. The root is its own parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeSpec {
    parent: Vec<usize>,
    root: usize,
}

impl TreeSpec {
    /// `parent[i]` is the 0-based parent of person `i`.
    pub fn new(parent: Vec<usize>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::BadTreeSpec { reason: "empty tree".into() });
        }
        if let Some(&p) = parent.iter().find(|&&p| p >= n) {
            return Err(Error::IndexOutOfRange { index: p, n });
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i] == i).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::CyclicSpec { node: 0 }),
            _ => {
                return Err(Error::BadTreeSpec {
                    reason: format!("{} roots; exactly one node may be its own parent", roots.len()),
                })
            }
        };
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while cur != root {
                cur = parent[cur];
                steps += 1;
                if steps > n {
                    return Err(Error::CyclicSpec { node: start });
                }
            }
        }
        Ok(TreeSpec { parent, root })
    }

    /// 1-based parent list, as written on the command line.
    pub fn from_one_based(parent: &[usize]) -> Result<Self> {
        if parent.contains(&0) {
            return Err(Error::Parse("person indices are 1-based".into()));
        }
        TreeSpec::new(parent.iter().map(|p| p - 1).collect())
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> usize {
        self.parent[i]
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

/// Each person listens only to their parent; the root listens to itself.
pub fn gen_family_tree(spec: &TreeSpec) -> DominatedMatrix {
    let n = spec.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, spec.parent(i))] = 1.0;
    }
    DominatedMatrix::new(m).expect("tree rows are unit vectors")
}

/// How non-candidates split between candidates by walking up the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreferenceGroups {
    /// Non-candidates whose chain reaches the (non-candidate) root first.
    pub leader_group: IndexSet,
    /// `(candidate, supporters)` in candidate order.
    pub candidate_groups: Vec<(usize, IndexSet)>,
}

impl PreferenceGroups {
    pub fn supporters_of(&self, candidate: usize) -> Option<&IndexSet> {
        self.candidate_groups.iter().find(|(c, _)| *c == candidate).map(|(_, g)| g)
    }
}

/// Groups non-candidates by the first candidate on their parent chain.
/// The root, when not a candidate, belongs to no group.
pub fn tree_preference_groups(spec: &TreeSpec, candidates: &IndexSet) -> Result<PreferenceGroups> {
    if candidates.is_empty() {
        return Err(Error::EmptyIndexSet { what: "candidate" });
    }
    candidates.check_bounds(spec.len())?;
    let mut leader = Vec::new();
    let mut groups: Vec<(usize, Vec<usize>)> = candidates.iter().map(|c| (c, Vec::new())).collect();
    for i in 0..spec.len() {
        if candidates.contains(i) || i == spec.root() {
            continue;
        }
        let mut cur = spec.parent(i);
        loop {
            if let Some(pos) = candidates.position(cur) {
                groups[pos].1.push(i);
                break;
            }
            if cur == spec.root() {
                leader.push(i);
                break;
            }
            cur = spec.parent(cur);
        }
    }
    Ok(PreferenceGroups {
        leader_group: IndexSet::new(leader),
        candidate_groups: groups.into_iter().map(|(c, g)| (c, IndexSet::new(g))).collect(),
    })
}

/// Everyone gives weight `s` to each other member and `1 − (k−1)s` to
/// themselves.
pub fn gen_equality(k: usize, s: f64) -> Result<DominatedMatrix> {
    if k == 0 {
        return Err(Error::BadParameters { reason: "family size must be at least 1".into() });
    }
    let off = (k - 1) as f64 * s;
    if !(s > 0.0) || !s.is_finite() || off > 1.0 + ROW_TOL {
        return Err(Error::BadParameters { reason: format!("need s > 0 and (k-1)s <= 1, got s = {s}") });
    }
    let r = (1.0 - off).max(0.0);
    DominatedMatrix::new(DMatrix::from_fn(k, k, |i, j| if i == j { r } else { s }))
}

/// Near-identity society `I + εB`.
pub fn gen_garden(b: &DMatrix<f64>, eps: f64) -> Result<PoliticsMatrix> {
    check_generator(b)?;
    let n = b.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && !(b[(i, j)] > 0.0) {
                return Err(Error::InvalidCorrection {
                    reason: format!("off-diagonal entry ({}, {}) must be positive", i + 1, j + 1),
                });
            }
        }
    }
    let a = DMatrix::<f64>::identity(n, n) + b * eps;
    if !(eps > 0.0) || a.iter().any(|v| !(*v > 0.0 && *v < 1.0)) && n > 1 {
        return Err(Error::EpsTooLarge { eps });
    }
    PoliticsMatrix::new(a)
}

/// Garden generator with equal off-diagonal rates: `b_ij = 1` for `i ≠ j`.
pub fn uniform_garden_generator(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { -((n - 1) as f64) } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{is_family, upper_class_families};
    use crate::matrix::StochasticMatrix;

    fn sample_tree_spec() -> TreeSpec {
        TreeSpec::from_one_based(&[1, 1, 1, 2, 2, 3]).unwrap()
    }

    #[test]
    fn father_and_sons_plain() {
        let a = gen_father_and_sons(3, None).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.matrix(), &expect);
        assert_eq!(gen_father_and_sons(1, None).unwrap().matrix(), &DMatrix::identity(1, 1));
        let uc = upper_class_families(&a);
        assert_eq!(uc.len(), 1);
        assert_eq!(uc[0].members(), &IndexSet::new([0]));
    }

    #[test]
    fn father_and_sons_with_listening_leader() {
        let a = gen_father_and_sons(3, Some(&[0.5, 0.3, 0.2])).unwrap();
        assert_eq!(a.entry(0, 1), 0.3);
        let uc = upper_class_families(&a);
        assert_eq!(uc.len(), 1);
        assert_eq!(uc[0].members(), &IndexSet::full(3));
        assert!(is_family(&a, &IndexSet::full(3)));
        assert!(matches!(
            gen_father_and_sons(3, Some(&[0.5, 0.3])),
            Err(Error::BadDistribution { .. })
        ));
        assert!(matches!(
            gen_father_and_sons(3, Some(&[0.5, 0.3, 0.3])),
            Err(Error::BadDistribution { .. })
        ));
    }

    #[test]
    fn sample_tree_matrix() {
        let a = gen_family_tree(&sample_tree_spec());
        let rows = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                assert_eq!(a.entry(i, j), *v);
            }
        }
        let uc = upper_class_families(&a);
        assert_eq!(uc.len(), 1);
        assert_eq!(uc[0].members(), &IndexSet::new([0]));
        let single = TreeSpec::new(vec![0]).unwrap();
        assert_eq!(gen_family_tree(&single).matrix(), &DMatrix::identity(1, 1));
    }

    #[test]
    fn tree_spec_errors() {
        assert!(matches!(TreeSpec::new(vec![1, 0]), Err(Error::CyclicSpec { .. })));
        assert!(matches!(TreeSpec::new(vec![0, 2, 1]), Err(Error::CyclicSpec { node: 1 })));
        assert!(matches!(TreeSpec::new(vec![0, 1]), Err(Error::BadTreeSpec { .. })));
        assert!(matches!(TreeSpec::new(vec![0, 7]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn preference_groups() {
        let spec = sample_tree_spec();
        let g = tree_preference_groups(&spec, &IndexSet::from_one_based([1, 2]).unwrap()).unwrap();
        assert_eq!(g.supporters_of(1).unwrap(), &IndexSet::from_one_based([4, 5]).unwrap());
        assert_eq!(g.supporters_of(0).unwrap(), &IndexSet::from_one_based([3, 6]).unwrap());
        assert!(g.leader_group.is_empty());

        let g = tree_preference_groups(&spec, &IndexSet::from_one_based([2, 3]).unwrap()).unwrap();
        assert_eq!(g.supporters_of(1).unwrap(), &IndexSet::from_one_based([4, 5]).unwrap());
        assert_eq!(g.supporters_of(2).unwrap(), &IndexSet::from_one_based([6]).unwrap());
        assert!(g.leader_group.is_empty());

        let g = tree_preference_groups(&spec, &IndexSet::new([0])).unwrap();
        assert_eq!(g.supporters_of(0).unwrap(), &IndexSet::new(1..6));

        let g = tree_preference_groups(&spec, &IndexSet::from_one_based([2]).unwrap()).unwrap();
        assert_eq!(g.leader_group, IndexSet::from_one_based([3, 6]).unwrap());
    }

    #[test]
    fn equality_family() {
        let a = gen_equality(3, 0.25).unwrap();
        assert_eq!(a.entry(0, 0), 0.5);
        assert_eq!(a.entry(1, 2), 0.25);
        let b = gen_equality(3, 0.5).unwrap();
        assert_eq!(b.entry(2, 2), 0.0);
        assert_eq!(upper_class_families(&b)[0].members(), &IndexSet::full(3));
        assert!(matches!(gen_equality(3, 0.6), Err(Error::BadParameters { .. })));
        assert!(matches!(gen_equality(3, 0.0), Err(Error::BadParameters { .. })));
    }

    #[test]
    fn garden() {
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let a = gen_garden(&b, 0.1).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        assert!(crate::linalg::max_abs(&(a.matrix() - expect)) < 1e-15);
        assert!(matches!(gen_garden(&b, 1.5), Err(Error::EpsTooLarge { .. })));
        let zero_off = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]);
        assert!(matches!(gen_garden(&zero_off, 0.1), Err(Error::InvalidCorrection { .. })));
        let ident = DominatedMatrix::identity(4);
        let uc = upper_class_families(&ident);
        assert_eq!(uc.len(), 4);
    }
}
