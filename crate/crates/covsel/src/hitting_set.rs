//! Exact cardinality-constrained hitting sets.
//!
//! The optimizer asks for a set of exactly `target` indices that
//! intersects every accumulated core. Any superset of a hitting set
//! still hits every core, so the problem reduces to: find a minimum
//! hitting set by branch and bound, fail if it is larger than
//! `target`, and otherwise pad it with unused indices, preferring
//! high individual scores.
//!
//! The solver sits behind a small trait so an external ILP or MaxSAT
//! backend could be dropped in without touching the optimizer.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use thiserror::Error;

use crate::measures::Score;

/// A nonempty set of summary indices; improving the current candidate
/// requires picking at least one of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Core {
    members: BTreeSet<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HsError {
    #[error("core must be nonempty")]
    EmptyCore,
    #[error("core member {member} exceeds universe size {universe}")]
    MemberOutOfRange { member: usize, universe: usize },
    #[error("target cardinality {target} exceeds universe size {universe}")]
    TargetTooLarge { target: usize, universe: usize },
    #[error("need one score per index: {scores} scores for universe {universe}")]
    ScoreLengthMismatch { scores: usize, universe: usize },
}

impl Core {
    pub fn new(members: BTreeSet<usize>) -> Result<Core, HsError> {
        if members.is_empty() {
            return Err(HsError::EmptyCore);
        }
        Ok(Core { members })
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One hitting-set query.
#[derive(Debug, Clone)]
pub struct HsInstance {
    pub universe: usize,
    pub cores: Vec<Core>,
    pub target: usize,
    /// Individual scores used only to break ties when padding.
    pub scores: Vec<Score>,
}

impl HsInstance {
    pub fn new(
        universe: usize,
        cores: Vec<Core>,
        target: usize,
        scores: Vec<Score>,
    ) -> Result<HsInstance, HsError> {
        if target > universe {
            return Err(HsError::TargetTooLarge { target, universe });
        }
        if scores.len() != universe {
            return Err(HsError::ScoreLengthMismatch {
                scores: scores.len(),
                universe,
            });
        }
        for core in &cores {
            if let Some(&member) = core.members.iter().next_back() {
                if member >= universe {
                    return Err(HsError::MemberOutOfRange { member, universe });
                }
            }
        }
        Ok(HsInstance {
            universe,
            cores,
            target,
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HsOutcome {
    /// Exactly `target` indices hitting every core.
    Solution(BTreeSet<usize>),
    /// No hitting set of size `target` exists.
    Infeasible,
    /// Deadline expired before the search finished.
    Timeout,
}

pub trait HittingSetSolver {
    fn solve(&mut self, instance: &HsInstance, deadline: Option<Instant>) -> HsOutcome;
}

/// Branch-and-bound minimum hitting set with a greedy upper bound and
/// a disjoint-core-packing lower bound. Deterministic: all orderings
/// are fixed.
#[derive(Debug, Default, Clone)]
pub struct BranchAndBound;

impl HittingSetSolver for BranchAndBound {
    fn solve(&mut self, instance: &HsInstance, deadline: Option<Instant>) -> HsOutcome {
        let cores = minimize_cores(&instance.cores);

        let minimum = if cores.is_empty() {
            Vec::new()
        } else {
            let upper = greedy_hitting_set(&cores);
            let mut search = Search {
                cores: &cores,
                best: upper,
                deadline,
                nodes: 0,
                timed_out: false,
            };
            let mut chosen = Vec::new();
            let mut hit_counts = vec![0u32; cores.len()];
            search.dfs(&mut chosen, &mut hit_counts, cores.len());
            if search.timed_out {
                return HsOutcome::Timeout;
            }
            search.best
        };

        if minimum.len() > instance.target {
            return HsOutcome::Infeasible;
        }

        let mut solution: BTreeSet<usize> = minimum.into_iter().collect();
        // pad with unused indices, best individual score first
        let mut rest: Vec<usize> = (0..instance.universe)
            .filter(|i| !solution.contains(i))
            .collect();
        rest.sort_by(|&a, &b| {
            instance.scores[b]
                .cmp(&instance.scores[a])
                .then(a.cmp(&b))
        });
        for index in rest {
            if solution.len() == instance.target {
                break;
            }
            solution.insert(index);
        }

        assert_eq!(solution.len(), instance.target, "padded to exact cardinality");
        for core in &instance.cores {
            assert!(
                core.members().iter().any(|m| solution.contains(m)),
                "solution must hit every core"
            );
        }
        HsOutcome::Solution(solution)
    }
}

/// Deduplicate and drop cores that are supersets of another core
/// (hitting the subset hits them for free). Result is sorted by
/// (length, members) for deterministic traversal.
fn minimize_cores(cores: &[Core]) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = cores
        .iter()
        .map(|c| c.members().iter().copied().collect())
        .collect();
    sets.sort();
    sets.dedup();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    let mut kept: Vec<Vec<usize>> = Vec::new();
    'outer: for set in sets {
        for smaller in &kept {
            if smaller.iter().all(|m| set.binary_search(m).is_ok()) {
                continue 'outer;
            }
        }
        kept.push(set);
    }
    kept
}

/// Greedy upper bound: repeatedly take the element hitting the most
/// uncovered cores, ties by lowest index.
fn greedy_hitting_set(cores: &[Vec<usize>]) -> Vec<usize> {
    let mut uncovered: Vec<bool> = vec![true; cores.len()];
    let mut remaining = cores.len();
    let mut result = Vec::new();
    while remaining > 0 {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for (i, core) in cores.iter().enumerate() {
            if uncovered[i] {
                for &m in core {
                    *counts.entry(m).or_insert(0) += 1;
                }
            }
        }
        let best = counts
            .iter()
            .map(|(&e, &c)| (e, c))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(e, _)| e)
            .expect("uncovered cores are nonempty");
        result.push(best);
        for (i, core) in cores.iter().enumerate() {
            if uncovered[i] && core.binary_search(&best).is_ok() {
                uncovered[i] = false;
                remaining -= 1;
            }
        }
    }
    result.sort_unstable();
    result
}

struct Search<'a> {
    cores: &'a [Vec<usize>],
    best: Vec<usize>,
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
}

impl Search<'_> {
    /// Lower bound: size of a greedy packing of pairwise disjoint
    /// uncovered cores.
    fn packing_bound(&self, hit_counts: &[u32]) -> usize {
        let mut used: BTreeSet<usize> = BTreeSet::new();
        let mut packed = 0;
        for (i, core) in self.cores.iter().enumerate() {
            if hit_counts[i] == 0 && core.iter().all(|m| !used.contains(m)) {
                packed += 1;
                used.extend(core.iter().copied());
            }
        }
        packed
    }

    fn dfs(&mut self, chosen: &mut Vec<usize>, hit_counts: &mut Vec<u32>, uncovered: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 256 == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                    return;
                }
            }
        }
        if uncovered == 0 {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
                self.best.sort_unstable();
            }
            return;
        }
        if chosen.len() + self.packing_bound(hit_counts) >= self.best.len() {
            return;
        }
        // branch on the smallest uncovered core
        let branch = (0..self.cores.len())
            .filter(|&i| hit_counts[i] == 0)
            .min_by(|&a, &b| {
                self.cores[a]
                    .len()
                    .cmp(&self.cores[b].len())
                    .then(a.cmp(&b))
            })
            .expect("some core is uncovered");
        // try elements covering many uncovered cores first
        let mut elements: Vec<(usize, usize)> = self.cores[branch]
            .iter()
            .map(|&e| {
                let degree = self
                    .cores
                    .iter()
                    .enumerate()
                    .filter(|(i, core)| hit_counts[*i] == 0 && core.binary_search(&e).is_ok())
                    .count();
                (e, degree)
            })
            .collect();
        elements.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (element, _) in elements {
            let mut newly_covered = 0;
            for (i, core) in self.cores.iter().enumerate() {
                if core.binary_search(&element).is_ok() {
                    if hit_counts[i] == 0 {
                        newly_covered += 1;
                    }
                    hit_counts[i] += 1;
                }
            }
            chosen.push(element);
            self.dfs(chosen, hit_counts, uncovered - newly_covered);
            chosen.pop();
            for (i, core) in self.cores.iter().enumerate() {
                if core.binary_search(&element).is_ok() {
                    hit_counts[i] -= 1;
                }
            }
            if self.timed_out {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn core(members: &[usize]) -> Core {
        Core::new(members.iter().copied().collect()).unwrap()
    }

    fn unit_scores(n: usize) -> Vec<Score> {
        vec![Score::from_integer(0); n]
    }

    fn solve(inst: &HsInstance) -> HsOutcome {
        BranchAndBound.solve(inst, None)
    }

    #[test]
    fn overlapping_cores_solved_by_shared_element() {
        let inst = HsInstance::new(
            4,
            vec![core(&[1, 2]), core(&[2, 3])],
            1,
            unit_scores(4),
        )
        .unwrap();
        assert_eq!(solve(&inst), HsOutcome::Solution(BTreeSet::from([2])));
    }

    #[test]
    fn disjoint_singletons_are_infeasible_at_one() {
        let inst = HsInstance::new(4, vec![core(&[1]), core(&[2])], 1, unit_scores(4)).unwrap();
        assert_eq!(solve(&inst), HsOutcome::Infeasible);
    }

    #[test]
    fn empty_cores_pad_by_score() {
        let scores = vec![
            Score::from_integer(3),
            Score::from_integer(1),
            Score::from_integer(2),
        ];
        let inst = HsInstance::new(3, vec![], 2, scores).unwrap();
        assert_eq!(solve(&inst), HsOutcome::Solution(BTreeSet::from([0, 2])));
    }

    #[test]
    fn deterministic_across_runs() {
        let inst = HsInstance::new(
            6,
            vec![core(&[0, 3]), core(&[1, 3, 5]), core(&[2, 4])],
            3,
            unit_scores(6),
        )
        .unwrap();
        let first = solve(&inst);
        for _ in 0..5 {
            assert_eq!(solve(&inst), first);
        }
    }

    #[test]
    fn invalid_instances_rejected() {
        assert!(matches!(
            HsInstance::new(3, vec![], 4, unit_scores(3)),
            Err(HsError::TargetTooLarge { .. })
        ));
        assert!(matches!(
            HsInstance::new(3, vec![core(&[5])], 1, unit_scores(3)),
            Err(HsError::MemberOutOfRange { .. })
        ));
        assert!(Core::new(BTreeSet::new()).is_err());
    }

    /// Brute force: does any subset of exactly `target` indices hit
    /// every core?
    fn brute_force_feasible(universe: usize, cores: &[Core], target: usize) -> bool {
        for mask in 0u32..(1 << universe) {
            if mask.count_ones() as usize != target {
                continue;
            }
            let hits_all = cores.iter().all(|core| {
                core.members().iter().any(|&m| mask & (1 << m) != 0)
            });
            if hits_all {
                return true;
            }
        }
        false
    }

    #[test]
    fn agrees_with_brute_force_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(0x4853);
        for round in 0..300 {
            let universe = rng.gen_range(1..=10);
            let target = rng.gen_range(0..=universe);
            let n_cores = rng.gen_range(0..=8);
            let cores: Vec<Core> = (0..n_cores)
                .map(|_| {
                    let size = rng.gen_range(1..=universe);
                    let mut members = BTreeSet::new();
                    while members.len() < size {
                        members.insert(rng.gen_range(0..universe));
                    }
                    Core::new(members).unwrap()
                })
                .collect();
            let scores: Vec<Score> = (0..universe)
                .map(|_| Score::from_integer(rng.gen_range(0..20)))
                .collect();
            let inst = HsInstance::new(universe, cores.clone(), target, scores).unwrap();
            let expected = brute_force_feasible(universe, &cores, target);
            match solve(&inst) {
                HsOutcome::Solution(s) => {
                    assert!(expected, "round {round}: solver found a set but brute force says infeasible");
                    assert_eq!(s.len(), target);
                }
                HsOutcome::Infeasible => {
                    assert!(!expected, "round {round}: solver says infeasible but brute force found a set");
                }
                HsOutcome::Timeout => panic!("no deadline was set"),
            }
        }
    }
}
