//! Family topology of a dominated matrix.
//!
//! A set `F` is a family when nobody in `F` listens outside it
//! (`Â_{F F'} = 0`). In the listening digraph (edge `i -> j` iff
//! `â_ij > 0`) families are exactly the out-closed vertex sets, so they
//! are unions of strongly connected components closed under successors
//! in the condensation. Upper-class families, the minimal nonempty ones,
//! are the terminal components.

use std::fmt;

use petgraph::algo::{connected_components, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::matrix::{DominatedMatrix, StochasticMatrix};

/// Default cap on condensation components for exhaustive listing.
pub const ENUM_LIMIT: usize = 20;

/// Index set closed under listening.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Family(IndexSet);

impl Family {
    pub fn members(&self) -> &IndexSet {
        &self.0
    }

    pub fn into_members(self) -> IndexSet {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<IndexSet> for Family {
    fn from(members: IndexSet) -> Self {
        Family(members)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Every family of a matrix, plus its upper class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyTopology {
    pub families: Vec<Family>,
    pub upper_class: Vec<Family>,
}

impl FamilyTopology {
    pub fn contains(&self, set: &IndexSet) -> bool {
        self.families.iter().any(|f| f.members() == set)
    }
}

/// JSON shape of a family report; `families` is `None` when the listing
/// exceeded the enumeration cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub families: Option<Vec<Family>>,
    pub upper_class: Vec<Family>,
    pub connected: bool,
}

pub fn family_report(a: &DominatedMatrix, limit: usize) -> FamilyReport {
    FamilyReport {
        families: enumerate_families_with_limit(a, limit).ok().map(|t| t.families),
        upper_class: upper_class_families(a),
        connected: is_connected(a),
    }
}

/// True iff no member of `f` listens to anyone outside `f`.
pub fn is_family(a: &DominatedMatrix, f: &IndexSet) -> bool {
    let n = a.n();
    f.iter()
        .all(|i| (0..n).filter(|j| !f.contains(*j)).all(|j| !a.listens(i, j)))
}

fn listening_graph(a: &DominatedMatrix) -> DiGraph<(), ()> {
    let n = a.n();
    let mut g = DiGraph::with_capacity(n, n * n);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && a.listens(i, j) {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    g
}

/// Strongly connected components with their successor sets.
struct Condensation {
    components: Vec<IndexSet>,
    successors: Vec<Vec<usize>>,
}

impl Condensation {
    fn of(a: &DominatedMatrix) -> Self {
        let n = a.n();
        let g = listening_graph(a);
        let mut components: Vec<IndexSet> = tarjan_scc(&g)
            .into_iter()
            .map(|c| IndexSet::new(c.into_iter().map(|v| v.index())))
            .collect();
        components.sort_by_key(|c| c.as_slice()[0]);
        let mut comp_of = vec![0; n];
        for (k, c) in components.iter().enumerate() {
            for i in c.iter() {
                comp_of[i] = k;
            }
        }
        let mut successors = vec![Vec::new(); components.len()];
        for e in g.raw_edges() {
            let (s, t) = (comp_of[e.source().index()], comp_of[e.target().index()]);
            if s != t && !successors[s].contains(&t) {
                successors[s].push(t);
            }
        }
        Condensation { components, successors }
    }

    fn terminal(&self) -> impl Iterator<Item = &IndexSet> {
        self.components
            .iter()
            .zip(&self.successors)
            .filter(|(_, s)| s.is_empty())
            .map(|(c, _)| c)
    }
}

/// Lists all families when the condensation has at most [`ENUM_LIMIT`]
/// components.
pub fn enumerate_families(a: &DominatedMatrix) -> Result<FamilyTopology> {
    enumerate_families_with_limit(a, ENUM_LIMIT)
}

pub fn enumerate_families_with_limit(a: &DominatedMatrix, limit: usize) -> Result<FamilyTopology> {
    let cond = Condensation::of(a);
    let c = cond.components.len();
    if c > limit || c >= 64 {
        return Err(Error::TooLarge { components: c, limit });
    }
    let succ_mask: Vec<u64> = cond
        .successors
        .iter()
        .map(|s| s.iter().fold(0u64, |m, &t| m | 1 << t))
        .collect();
    let mut families = Vec::new();
    for mask in 0u64..(1u64 << c) {
        let closed = (0..c)
            .filter(|k| mask >> k & 1 == 1)
            .all(|k| succ_mask[k] & !mask == 0);
        if closed {
            let members = (0..c)
                .filter(|k| mask >> k & 1 == 1)
                .flat_map(|k| cond.components[k].iter());
            families.push(Family(IndexSet::new(members)));
        }
    }
    families.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    Ok(FamilyTopology { families, upper_class: upper_class_families(a) })
}

/// Minimal nonempty families: the terminal strongly connected components,
/// ordered by smallest member.
pub fn upper_class_families(a: &DominatedMatrix) -> Vec<Family> {
    Condensation::of(a).terminal().cloned().map(Family).collect()
}

/// False iff the society splits into two nonempty families with no
/// listening across, i.e. the digraph is disconnected as an undirected graph.
pub fn is_connected(a: &DominatedMatrix) -> bool {
    connected_components(&listening_graph(a)) <= 1
}

/// An upper-class family lying inside `voters`, if any. One exists exactly
/// when `I − Â_II` is singular.
pub fn family_in_block(a: &DominatedMatrix, voters: &IndexSet) -> Option<Family> {
    Condensation::of(a)
        .terminal()
        .find(|c| c.is_subset(voters))
        .cloned()
        .map(Family)
}

/// Smallest family containing `seed`: everyone reachable from it.
pub fn family_closure(a: &DominatedMatrix, seed: &IndexSet) -> Family {
    let n = a.n();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = seed.iter().collect();
    for &i in &stack {
        seen[i] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && a.listens(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    Family(IndexSet::new((0..n).filter(|&i| seen[i])))
}

/// Largest family contained in `set`: members that cannot reach outside.
pub fn largest_family_in(a: &DominatedMatrix, set: &IndexSet) -> Family {
    let members = set
        .iter()
        .filter(|&i| family_closure(a, &IndexSet::new([i])).members().is_subset(set));
    Family(IndexSet::new(members))
}
