//! Index-set bookkeeping.
//!
//! Internally every index is 0-based. Display and serialization use the
//! 1-based person numbering that reports and files carry.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of 0-based person indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new<I: IntoIterator<Item = usize>>(items: I) -> Self {
        let mut v: Vec<usize> = items.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    /// Builds from 1-based person numbers; rejects 0.
    pub fn from_one_based<I: IntoIterator<Item = usize>>(items: I) -> Result<Self> {
        let mut out = Vec::new();
        for i in items {
            if i == 0 {
                return Err(Error::Parse("person indices are 1-based".into()));
            }
            out.push(i - 1);
        }
        Ok(IndexSet::new(out))
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        IndexSet((0..n).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// Complement within `{0, .., n-1}`.
    pub fn complement(&self, n: usize) -> Self {
        IndexSet((0..n).filter(|i| !self.contains(*i)).collect())
    }

    pub fn union(&self, other: &Self) -> Self {
        IndexSet::new(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &Self) -> Self {
        IndexSet(self.iter().filter(|i| other.contains(*i)).collect())
    }

    pub fn difference(&self, other: &Self) -> Self {
        IndexSet(self.iter().filter(|i| !other.contains(*i)).collect())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// Position of `i` within the set.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&i) if i >= n => Err(Error::IndexOutOfRange { index: i, n }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        IndexSet::from_one_based(raw).map_err(serde::de::Error::custom)
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        IndexSet::new(iter)
    }
}

/// Voters `I` and candidates `J`: disjoint, nonempty subsets of `{0..n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexPartition {
    n: usize,
    voters: IndexSet,
    candidates: IndexSet,
}

impl IndexPartition {
    pub fn new(n: usize, voters: IndexSet, candidates: IndexSet) -> Result<Self> {
        if voters.is_empty() {
            return Err(Error::EmptyIndexSet { what: "voter" });
        }
        if candidates.is_empty() {
            return Err(Error::EmptyIndexSet { what: "candidate" });
        }
        voters.check_bounds(n)?;
        candidates.check_bounds(n)?;
        if let Some(i) = voters.iter().find(|&i| candidates.contains(i)) {
            return Err(Error::Overlap { index: i });
        }
        Ok(IndexPartition { n, voters, candidates })
    }

    /// Voters default to everyone who is not a candidate.
    pub fn with_complement(n: usize, candidates: IndexSet) -> Result<Self> {
        let voters = candidates.complement(n);
        IndexPartition::new(n, voters, candidates)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn voters(&self) -> &IndexSet {
        &self.voters
    }

    pub fn candidates(&self) -> &IndexSet {
        &self.candidates
    }

    /// True when the voters are exactly the non-candidates.
    pub fn is_complementary(&self) -> bool {
        self.voters.len() + self.candidates.len() == self.n
    }
}
