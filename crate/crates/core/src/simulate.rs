//! Seeded Monte Carlo delegation.
//!
//! Trial `t` draws from ChaCha8 stream `t` of the seeded generator, and
//! batches of trials are merged as integer counts, so output does not
//! depend on the number of threads.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{IndexPartition, IndexSet};
use crate::matrix::StochasticMatrix;

/// Safety cap on the length of one random walk.
pub const MAX_WALK_STEPS: usize = 1_000_000;
/// Cap on cycle resamples within one joint trial.
pub const MAX_RESAMPLES: usize = 10_000;
/// Trials per parallel work unit.
pub const BATCH_SIZE: u64 = 4096;

const NO_SUPPORT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub trials: u64,
    pub seed: u64,
    pub partition: IndexPartition,
    /// `counts[i][j]`: trials in which voter `i` ended at candidate `j`.
    pub marginal_counts: Vec<Vec<u64>>,
    /// Keys hold, per voter, the candidate position or `u32::MAX` when the
    /// walk left `I ∪ J`.
    pub joint_counts: BTreeMap<Vec<u32>, u64>,
    pub unresolved: u64,
}

impl SimulationResult {
    pub fn marginal(&self) -> Vec<Vec<f64>> {
        let t = self.trials as f64;
        self.marginal_counts.iter().map(|r| r.iter().map(|&c| c as f64 / t).collect()).collect()
    }

    /// Frequency of profiles matching `event`. Profile entries are
    /// candidate positions (`None` for no support).
    pub fn joint_frequency<F: Fn(&[Option<usize>]) -> bool>(&self, event: F) -> f64 {
        let hits: u64 = self
            .joint_counts
            .iter()
            .filter(|(k, _)| event(&decode(k)))
            .map(|(_, c)| *c)
            .sum();
        hits as f64 / self.trials as f64
    }

    /// Binomial standard error of a frequency `p` over this many trials.
    pub fn std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

fn decode(key: &[u32]) -> Vec<Option<usize>> {
    key.iter().map(|&c| (c != NO_SUPPORT).then_some(c as usize)).collect()
}

#[derive(Serialize)]
struct JointEntry {
    profile: Vec<Option<usize>>,
    freq: f64,
}

impl Serialize for SimulationResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cands = self.partition.candidates().as_slice();
        let t = self.trials as f64;
        let joint: Vec<JointEntry> = self
            .joint_counts
            .iter()
            .map(|(k, &c)| JointEntry {
                profile: decode(k).into_iter().map(|p| p.map(|pos| cands[pos] + 1)).collect(),
                freq: c as f64 / t,
            })
            .collect();
        let mut st = s.serialize_struct("SimulationResult", 5)?;
        st.serialize_field("trials", &self.trials)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("marginal", &self.marginal())?;
        st.serialize_field("joint", &joint)?;
        st.serialize_field("unresolved", &self.unresolved)?;
        st.end()
    }
}

enum Step {
    Candidate(u32),
    Voter(usize),
    Outside,
}

struct Walker {
    rows: Vec<WeightedIndex<f64>>,
    /// Rows with the diagonal removed; `None` when a person listens only
    /// to themselves. A self-loop never moves a walk, so walks skip it.
    moves: Vec<Option<WeightedIndex<f64>>>,
    voter_pos: Vec<Option<usize>>,
    cand_pos: Vec<Option<u32>>,
}

impl Walker {
    fn new<M: StochasticMatrix>(a: &M, partition: &IndexPartition) -> Result<Self> {
        let n = a.n();
        if partition.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: partition.n() });
        }
        let rows = (0..n)
            .map(|i| {
                WeightedIndex::new(a.matrix().row(i).iter().copied())
                    .map_err(|e| Error::BadDistribution { reason: format!("row {}: {e}", i + 1) })
            })
            .collect::<Result<Vec<_>>>()?;
        let moves = (0..n)
            .map(|i| {
                let off: Vec<f64> = (0..n).map(|j| if j == i { 0.0 } else { a.entry(i, j) }).collect();
                WeightedIndex::new(off).ok()
            })
            .collect();
        let mut voter_pos = vec![None; n];
        for (p, i) in partition.voters().iter().enumerate() {
            voter_pos[i] = Some(p);
        }
        let mut cand_pos = vec![None; n];
        for (p, j) in partition.candidates().iter().enumerate() {
            cand_pos[j] = Some(p as u32);
        }
        Ok(Walker { rows, moves, voter_pos, cand_pos })
    }

    fn step(&self, from: usize, rng: &mut ChaCha8Rng) -> (usize, Step) {
        self.classify(self.rows[from].sample(rng))
    }

    fn classify(&self, j: usize) -> (usize, Step) {
        let s = if let Some(c) = self.cand_pos[j] {
            Step::Candidate(c)
        } else if let Some(p) = self.voter_pos[j] {
            Step::Voter(p)
        } else {
            Step::Outside
        };
        (j, s)
    }

    /// Walks from `start` until it reaches a candidate or leaves the voters.
    fn walk(&self, start: usize, rng: &mut ChaCha8Rng) -> Result<u32> {
        let mut cur = start;
        for _ in 0..MAX_WALK_STEPS {
            let Some(moves) = &self.moves[cur] else { break };
            match self.classify(moves.sample(rng)) {
                (_, Step::Candidate(c)) => return Ok(c),
                (_, Step::Outside) => return Ok(NO_SUPPORT),
                (j, Step::Voter(_)) => cur = j,
            }
        }
        Err(Error::WalkLimitExceeded { start, limit: MAX_WALK_STEPS })
    }
}

#[derive(Default)]
struct Tally {
    marginal: Vec<Vec<u64>>,
    joint: BTreeMap<Vec<u32>, u64>,
    unresolved: u64,
}

impl Tally {
    fn new(voters: usize, candidates: usize) -> Self {
        Tally { marginal: vec![vec![0; candidates]; voters], ..Default::default() }
    }

    fn record_marginal(&mut self, voter: usize, c: u32) {
        if c != NO_SUPPORT {
            self.marginal[voter][c as usize] += 1;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (r, o) in self.marginal.iter_mut().zip(other.marginal) {
            for (x, y) in r.iter_mut().zip(o) {
                *x += y;
            }
        }
        for (k, v) in other.joint {
            *self.joint.entry(k).or_insert(0) += v;
        }
        self.unresolved += other.unresolved;
        self
    }
}

fn run_batches<F>(trials: u64, shape: (usize, usize), batch: F) -> Result<Tally>
where
    F: Fn(u64, u64, &mut Tally) -> Result<()> + Sync,
{
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let batches = trials.div_ceil(BATCH_SIZE);
    let tallies = (0..batches)
        .into_par_iter()
        .map(|b| {
            let first = b * BATCH_SIZE;
            let last = (first + BATCH_SIZE).min(trials);
            let mut t = Tally::new(shape.0, shape.1);
            batch(first, last, &mut t)?;
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tallies
        .into_iter()
        .fold(Tally::new(shape.0, shape.1), Tally::merge))
}

/// Stream `trial` of the generator seeded with `seed`.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn finish(trials: u64, seed: u64, partition: &IndexPartition, t: Tally) -> SimulationResult {
    SimulationResult {
        trials,
        seed,
        partition: partition.clone(),
        marginal_counts: t.marginal,
        joint_counts: t.joint,
        unresolved: t.unresolved,
    }
}

/// Independent absorption walks, one per voter per trial.
pub fn simulate_marginals<M: StochasticMatrix>(
    a: &M,
    partition: &IndexPartition,
    trials: u64,
    seed: u64,
) -> Result<SimulationResult> {
    let walker = Walker::new(a, partition)?;
    let voters = partition.voters();
    let shape = (voters.len(), partition.candidates().len());
    let tally = run_batches(trials, shape, |first, last, t| {
        for trial in first..last {
            let rng = &mut trial_rng(seed, trial);
            for (p, i) in voters.iter().enumerate() {
                let c = walker.walk(i, rng)?;
                t.record_marginal(p, c);
            }
        }
        Ok(())
    })?;
    Ok(finish(trials, seed, partition, tally))
}

enum Choice {
    Candidate(u32),
    Voter(usize),
    Own,
    Outside,
}

fn choose(walker: &Walker, voters: &IndexSet, p: usize, rng: &mut ChaCha8Rng) -> Choice {
    match walker.step(voters.as_slice()[p], rng) {
        (_, Step::Candidate(c)) => Choice::Candidate(c),
        (_, Step::Outside) => Choice::Outside,
        (_, Step::Voter(q)) if q == p => Choice::Own,
        (_, Step::Voter(q)) => Choice::Voter(q),
    }
}

/// Finds one delegation cycle among voters, if any.
fn find_cycle(choices: &[Choice]) -> Option<Vec<usize>> {
    let k = choices.len();
    // 0 = unvisited, 1 = on current path, 2 = settled
    let mut state = vec![0u8; k];
    for start in 0..k {
        let mut path = Vec::new();
        let mut cur = start;
        let mut closed = false;
        while state[cur] == 0 {
            state[cur] = 1;
            path.push(cur);
            match choices[cur] {
                Choice::Voter(q) => cur = q,
                _ => break,
            }
            closed = state[cur] == 1;
        }
        if closed {
            let at = path.iter().position(|&x| x == cur).expect("cycle head is on the path");
            return Some(path[at..].to_vec());
        }
        for &x in &path {
            state[x] = 2;
        }
    }
    None
}

/// Shared-delegation profiles. Each voter draws one choice from their
/// row. A candidate decides directly; another voter means adopting that
/// voter's realized decision; choosing oneself means deciding privately
/// by a fresh walk. Delegation cycles among voters are broken by
/// redrawing the choices of the cycle members.
pub fn simulate_joint<M: StochasticMatrix>(
    a: &M,
    partition: &IndexPartition,
    trials: u64,
    seed: u64,
) -> Result<SimulationResult> {
    let walker = Walker::new(a, partition)?;
    let voters = partition.voters();
    let k = voters.len();
    let shape = (k, partition.candidates().len());
    let tally = run_batches(trials, shape, |first, last, t| {
        let mut decision = vec![NO_SUPPORT; k];
        let mut known = vec![false; k];
        for trial in first..last {
            let rng = &mut trial_rng(seed, trial);
            let mut choices: Vec<Choice> = (0..k).map(|p| choose(&walker, voters, p, rng)).collect();
            let mut resamples = 0;
            while let Some(cycle) = find_cycle(&choices) {
                resamples += 1;
                if resamples > MAX_RESAMPLES {
                    return Err(Error::ResampleLimit { trial, limit: MAX_RESAMPLES });
                }
                for p in cycle {
                    choices[p] = choose(&walker, voters, p, rng);
                }
            }
            t.unresolved += resamples as u64;

            known.fill(false);
            for start in 0..k {
                let mut chain = Vec::new();
                let mut cur = start;
                let d = loop {
                    if known[cur] {
                        break decision[cur];
                    }
                    chain.push(cur);
                    match choices[cur] {
                        Choice::Candidate(c) => break c,
                        Choice::Outside => break NO_SUPPORT,
                        Choice::Own => break walker.walk(voters.as_slice()[cur], rng)?,
                        Choice::Voter(q) => cur = q,
                    }
                };
                for p in chain {
                    decision[p] = d;
                    known[p] = true;
                }
            }
            for (p, &d) in decision.iter().enumerate() {
                t.record_marginal(p, d);
            }
            *t.joint.entry(decision.clone()).or_insert(0) += 1;
        }
        Ok(())
    })?;
    Ok(finish(trials, seed, partition, tally))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::support_matrix;
    use crate::matrix::{DominatedMatrix, PoliticsMatrix};

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
    fn case_one_marginals() {
        let r = simulate_marginals(&case_one(), &partition(), 200_000, 7).unwrap();
        for row in r.marginal() {
            assert!((row[0] - 0.8).abs() < 4.0 * r.std_error(0.8), "{row:?}");
            assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
        }
        assert!(r.joint_counts.is_empty());
    }

    #[test]
    fn uniform_is_uniform_over_candidates() {
        let a = PoliticsMatrix::uniform(5);
        let p = IndexPartition::with_complement(5, IndexSet::new([0, 3, 4])).unwrap();
        let r = simulate_marginals(&a, &p, 100_000, 1).unwrap();
        let se = r.std_error(1.0 / 3.0);
        for row in r.marginal() {
            for v in row {
                assert!((v - 1.0 / 3.0).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn case_one_joint_correlation() {
        let r = simulate_joint(&case_one(), &partition(), 200_000, 3).unwrap();
        let both = r.joint_frequency(|p| p == [Some(1), Some(1)]);
        assert!((both - 0.12).abs() < 4.0 * r.std_error(0.12), "{both}");
        assert_eq!(r.unresolved, 0);
    }

    #[test]
    fn independent_voters_factorize() {
        let a = DominatedMatrix::from_rows(&[
            vec![0.3, 0.0, 0.4, 0.3],
            vec![0.0, 0.6, 0.1, 0.3],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let r = simulate_joint(&a, &partition(), 200_000, 11).unwrap();
        let d = support_matrix(&a, &partition()).unwrap();
        let p = d.entries()[(0, 1)] * d.entries()[(1, 1)];
        let both = r.joint_frequency(|x| x == [Some(1), Some(1)]);
        assert!((both - p).abs() < 4.0 * r.std_error(p), "{both} vs {p}");
    }

    #[test]
    fn cycles_are_resampled() {
        let a = PoliticsMatrix::from_rows(&[
            vec![0.1, 0.8, 0.1],
            vec![0.8, 0.1, 0.1],
            vec![0.2, 0.2, 0.6],
        ])
        .unwrap();
        let p = IndexPartition::with_complement(3, IndexSet::new([2])).unwrap();
        let r = simulate_joint(&a, &p, 10_000, 5).unwrap();
        assert!(r.unresolved > 0);
        assert_eq!(r.marginal_counts, vec![vec![10_000], vec![10_000]]);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let a = PoliticsMatrix::from_rows(&[
            vec![0.2, 0.3, 0.1, 0.4],
            vec![0.3, 0.3, 0.2, 0.2],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.1, 0.1, 0.1, 0.7],
        ])
        .unwrap();
        let p = partition();
        let r1 = simulate_joint(&a, &p, 20_000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let r2 = pool.install(|| simulate_joint(&a, &p, 20_000, 42).unwrap());
        assert_eq!(r1, r2);
        let r3 = simulate_joint(&a, &p, 20_000, 43).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn trapped_walk_hits_limit() {
        let stuck = DominatedMatrix::identity(2);
        let p = IndexPartition::with_complement(2, IndexSet::new([1])).unwrap();
        assert!(matches!(simulate_marginals(&stuck, &p, 1, 0), Err(Error::WalkLimitExceeded { start: 0, .. })));
        let pair = DominatedMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p = IndexPartition::with_complement(3, IndexSet::new([2])).unwrap();
        assert!(matches!(simulate_marginals(&pair, &p, 1, 0), Err(Error::WalkLimitExceeded { .. })));
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(simulate_marginals(&case_one(), &partition(), 0, 1), Err(Error::NoTrials));
    }

    #[test]
    fn serializes_with_one_based_profiles() {
        let r = simulate_joint(&case_one(), &partition(), 100, 1).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["trials"], 100);
        let prof = v["joint"][0]["profile"].as_array().unwrap();
        assert!(prof.iter().all(|x| x == 3 || x == 4));
    }
}
