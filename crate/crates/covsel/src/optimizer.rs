//! Fixed-cardinality test selection by implicit hitting sets.
//!
//! The loop alternates between an exact solver and the black-box
//! coverage oracle: each candidate is a size-n hitting set of the
//! cores collected so far; if its score is neither the global maximum
//! nor an improvement path, a new core is extracted from it — a set of
//! summaries of which any better solution must contain at least one.
//! The search is exact when it terminates without hitting the time
//! limit: either some candidate reaches the score of the full summary
//! set, or the hitting-set solver proves no candidate is left.
//!
//! Core extraction grows a subset-maximal, score-preserving superset
//! of the candidate and returns its complement, walking the summaries
//! in increasing individual-score order either one at a time (linear
//! search) or in doubling chunks that fall back to single steps on a
//! score change (progression search).

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hitting_set::{Core, HittingSetSolver, HsInstance, HsOutcome};
use crate::measures::{score_to_f64, CoverageOracle, Score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Linear,
    #[default]
    Progression,
}

#[derive(Debug, Clone)]
pub struct SelectionProblem {
    /// Number of summaries to select.
    pub n: usize,
    pub strategy: SearchStrategy,
    /// Wall-clock budget; `None` runs to completion.
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub candidate: Vec<usize>,
    pub score: f64,
    pub core_size: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub selected: BTreeSet<usize>,
    pub score: Score,
    /// True when the search finished exactly: the score equals the
    /// full-set score or the candidate space was exhausted.
    pub optimal: bool,
    pub iterations: u64,
    pub cores_extracted: u64,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("cannot select {n} of {universe} summaries")]
    BadCardinality { n: usize, universe: usize },
}

/// Greedy initial candidate: repeatedly add the summary with the
/// largest marginal gain (ties by lowest index); once every gain is
/// zero, pad with the lowest unused indices.
pub fn heuristic_max(oracle: &mut dyn CoverageOracle, n: usize) -> BTreeSet<usize> {
    let universe = oracle.universe();
    assert!(n <= universe);
    let mut selected = BTreeSet::new();
    let mut current = oracle.eval(&selected);
    while selected.len() < n {
        let mut best: Option<(usize, Score)> = None;
        for i in 0..universe {
            if selected.contains(&i) {
                continue;
            }
            selected.insert(i);
            let gain = oracle.eval(&selected) - current;
            selected.remove(&i);
            match &best {
                Some((_, best_gain)) if gain <= *best_gain => {}
                _ => best = Some((i, gain)),
            }
        }
        match best {
            Some((i, gain)) if gain > Score::from_integer(0) => {
                selected.insert(i);
                current += gain;
            }
            _ => break,
        }
    }
    // all remaining gains are zero: pad by lowest index
    for i in 0..universe {
        if selected.len() == n {
            break;
        }
        selected.insert(i);
    }
    selected
}

struct Clock {
    start: Instant,
    deadline: Option<Instant>,
}

impl Clock {
    fn new(limit: Option<Duration>) -> Clock {
        let start = Instant::now();
        Clock {
            start,
            deadline: limit.map(|d| start + d),
        }
    }

    fn expired(&self) -> bool {
        self.deadline.map(|d| Instant::now() >= d).unwrap_or(false)
    }

    fn elapsed_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

/// Run the selection loop to completion or to the time limit.
pub fn select(
    oracle: &mut dyn CoverageOracle,
    solver: &mut dyn HittingSetSolver,
    problem: &SelectionProblem,
) -> Result<SelectionResult, SelectError> {
    let universe = oracle.universe();
    if problem.n == 0 || problem.n > universe {
        return Err(SelectError::BadCardinality {
            n: problem.n,
            universe,
        });
    }
    let clock = Clock::new(problem.time_limit);

    let full: BTreeSet<usize> = (0..universe).collect();
    let total_score = oracle.eval(&full);
    let singles: Vec<Score> = (0..universe)
        .map(|i| oracle.eval(&BTreeSet::from([i])))
        .collect();

    let mut best = heuristic_max(oracle, problem.n);
    let mut best_score = oracle.eval(&best);

    let mut cores: Vec<Core> = Vec::new();
    let mut seen_candidates: HashSet<Vec<usize>> = HashSet::new();
    let mut log = Vec::new();
    let mut iterations = 0;
    let mut cores_extracted = 0;

    let finish = |selected: BTreeSet<usize>,
                  score: Score,
                  optimal: bool,
                  iterations: u64,
                  cores_extracted: u64,
                  log: Vec<IterationRecord>| SelectionResult {
        selected,
        score,
        optimal,
        iterations,
        cores_extracted,
        log,
    };

    loop {
        if clock.expired() {
            return Ok(finish(best, best_score, false, iterations, cores_extracted, log));
        }
        let instance = HsInstance::new(universe, cores.clone(), problem.n, singles.clone())
            .expect("cores and target stay in range");
        let candidate = match solver.solve(&instance, clock.deadline) {
            HsOutcome::Solution(s) => s,
            HsOutcome::Infeasible => {
                // no candidate is left: the best seen is the optimum
                return Ok(finish(best, best_score, true, iterations, cores_extracted, log));
            }
            HsOutcome::Timeout => {
                return Ok(finish(best, best_score, false, iterations, cores_extracted, log));
            }
        };
        iterations += 1;
        let key: Vec<usize> = candidate.iter().copied().collect();
        assert!(
            seen_candidates.insert(key),
            "hitting-set candidates must never repeat"
        );

        let score = oracle.eval(&candidate);
        if score == total_score {
            log.push(IterationRecord {
                iteration: iterations,
                candidate: candidate.iter().copied().collect(),
                score: score_to_f64(&score),
                core_size: 0,
                elapsed_ms: clock.elapsed_ms(),
            });
            return Ok(finish(candidate, score, true, iterations, cores_extracted, log));
        }
        if score > best_score {
            best = candidate.clone();
            best_score = score;
        }

        let core = match extract_core(
            oracle,
            &candidate,
            &order_by_individual_score(&singles),
            total_score,
            problem.strategy,
            &clock,
        ) {
            Some(core) => core,
            None => {
                // ran out of time mid-extraction
                return Ok(finish(best, best_score, false, iterations, cores_extracted, log));
            }
        };
        cores_extracted += 1;
        log.push(IterationRecord {
            iteration: iterations,
            candidate: candidate.iter().copied().collect(),
            score: score_to_f64(&score),
            core_size: core.len(),
            elapsed_ms: clock.elapsed_ms(),
        });
        cores.push(core);
    }
}

/// Universe ordered by individual score ascending, ties by index.
fn order_by_individual_score(singles: &[Score]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..singles.len()).collect();
    order.sort_by(|&a, &b| singles[a].cmp(&singles[b]).then(a.cmp(&b)));
    order
}

fn extract_core(
    oracle: &mut dyn CoverageOracle,
    candidate: &BTreeSet<usize>,
    order: &[usize],
    total_score: Score,
    strategy: SearchStrategy,
    clock: &Clock,
) -> Option<Core> {
    let core_set = match strategy {
        SearchStrategy::Linear => extract_core_linear_impl(oracle, candidate, order, total_score, clock)?,
        SearchStrategy::Progression => {
            extract_core_progression_impl(oracle, candidate, order, total_score, clock)?
        }
    };
    let core = Core::new(core_set).expect("core is nonempty when the candidate score is not maximal");
    debug_assert!(core.members().iter().all(|m| !candidate.contains(m)));
    Some(core)
}

/// Linear-search core extraction. `None` means the clock ran out.
pub fn extract_core_linear(
    oracle: &mut dyn CoverageOracle,
    candidate: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let (order, total) = extraction_inputs(oracle);
    extract_core_linear_impl(oracle, candidate, &order, total, &Clock::new(None))
        .expect("no deadline")
}

/// Progression-search core extraction. `None` means the clock ran out.
pub fn extract_core_progression(
    oracle: &mut dyn CoverageOracle,
    candidate: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let (order, total) = extraction_inputs(oracle);
    extract_core_progression_impl(oracle, candidate, &order, total, &Clock::new(None))
        .expect("no deadline")
}

fn extraction_inputs(oracle: &mut dyn CoverageOracle) -> (Vec<usize>, Score) {
    let universe = oracle.universe();
    let singles: Vec<Score> = (0..universe)
        .map(|i| oracle.eval(&BTreeSet::from([i])))
        .collect();
    let full: BTreeSet<usize> = (0..universe).collect();
    let total = oracle.eval(&full);
    (order_by_individual_score(&singles), total)
}

fn extract_core_linear_impl(
    oracle: &mut dyn CoverageOracle,
    candidate: &BTreeSet<usize>,
    order: &[usize],
    total_score: Score,
    clock: &Clock,
) -> Option<BTreeSet<usize>> {
    let mut grown = candidate.clone();
    let current = oracle.eval(&grown);
    assert!(current < total_score, "no core exists at maximal score");
    for &s in order {
        if grown.contains(&s) {
            continue;
        }
        if clock.expired() {
            return None;
        }
        grown.insert(s);
        if oracle.eval(&grown) != current {
            grown.remove(&s);
        }
    }
    let core: BTreeSet<usize> = (0..oracle.universe())
        .filter(|i| !grown.contains(i))
        .collect();
    assert!(!core.is_empty());
    Some(core)
}

fn extract_core_progression_impl(
    oracle: &mut dyn CoverageOracle,
    candidate: &BTreeSet<usize>,
    order: &[usize],
    total_score: Score,
    clock: &Clock,
) -> Option<BTreeSet<usize>> {
    let mut grown = candidate.clone();
    let current = oracle.eval(&grown);
    assert!(current < total_score, "no core exists at maximal score");
    let pending: Vec<usize> = order
        .iter()
        .copied()
        .filter(|s| !candidate.contains(s))
        .collect();
    let mut i = 0;
    let mut chunk = 1usize;
    while i < pending.len() {
        if clock.expired() {
            return None;
        }
        let take = chunk.min(pending.len() - i);
        let slice = &pending[i..i + take];
        let mut extended = grown.clone();
        extended.extend(slice.iter().copied());
        if oracle.eval(&extended) == current {
            grown = extended;
            i += take;
            chunk = chunk.saturating_mul(2);
        } else if take == 1 {
            // this summary alone raises the score; it can never be
            // absorbed later, drop it for good
            i += 1;
            chunk = 1;
        } else {
            // restart the progression at the first uncommitted summary
            chunk = 1;
        }
    }
    let core: BTreeSet<usize> = (0..oracle.universe())
        .filter(|i| !grown.contains(i))
        .collect();
    assert!(!core.is_empty());
    Some(core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hitting_set::BranchAndBound;
    use std::collections::BTreeMap;

    /// Toy oracle: block coverage over explicit atom sets.
    struct AtomOracle {
        atoms: Vec<BTreeSet<u32>>,
        calls: u64,
    }

    impl AtomOracle {
        fn new(atoms: Vec<BTreeSet<u32>>) -> AtomOracle {
            AtomOracle { atoms, calls: 0 }
        }
    }

    impl CoverageOracle for AtomOracle {
        fn universe(&self) -> usize {
            self.atoms.len()
        }

        fn eval(&mut self, selected: &BTreeSet<usize>) -> Score {
            self.calls += 1;
            let mut union: BTreeSet<u32> = BTreeSet::new();
            for &i in selected {
                union.extend(self.atoms[i].iter().copied());
            }
            Score::from_integer(union.len() as i64)
        }
    }

    fn atoms(sets: &[&[u32]]) -> Vec<BTreeSet<u32>> {
        sets.iter()
            .map(|s| s.iter().copied().collect())
            .collect()
    }

    fn problem(n: usize, strategy: SearchStrategy) -> SelectionProblem {
        SelectionProblem {
            n,
            strategy,
            time_limit: None,
        }
    }

    #[test]
    fn greedy_picks_distinct_atoms() {
        // s1:{b1}, s2:{b1}, s3:{b2}; BC, n=2 -> {s1, s3}, score 2
        let mut oracle = AtomOracle::new(atoms(&[&[1], &[1], &[2]]));
        let picked = heuristic_max(&mut oracle, 2);
        assert_eq!(picked, BTreeSet::from([0, 2]));
        assert_eq!(oracle.eval(&picked), Score::from_integer(2));
    }

    #[test]
    fn greedy_full_universe() {
        let mut oracle = AtomOracle::new(atoms(&[&[1], &[2], &[3]]));
        assert_eq!(heuristic_max(&mut oracle, 3), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn select_reaches_exhaustive_maximum() {
        // s1:{b1}, s2:{b2}, s3:{b1,b2}, s4:{b3}; BC, n=2 -> score 3
        for strategy in [SearchStrategy::Linear, SearchStrategy::Progression] {
            let mut oracle = AtomOracle::new(atoms(&[&[1], &[2], &[1, 2], &[3]]));
            let result = select(&mut oracle, &mut BranchAndBound, &problem(2, strategy)).unwrap();
            assert_eq!(result.score, Score::from_integer(3));
            assert!(result.optimal);
            assert_eq!(oracle.eval(&result.selected), Score::from_integer(3));
        }
    }

    #[test]
    fn select_everything_is_trivially_optimal() {
        let mut oracle = AtomOracle::new(atoms(&[&[1], &[2], &[3]]));
        let result = select(
            &mut oracle,
            &mut BranchAndBound,
            &problem(3, SearchStrategy::Progression),
        )
        .unwrap();
        assert_eq!(result.selected, BTreeSet::from([0, 1, 2]));
        assert!(result.optimal);
        assert_eq!(result.score, Score::from_integer(3));
    }

    #[test]
    fn bad_cardinality_rejected() {
        let mut oracle = AtomOracle::new(atoms(&[&[1]]));
        assert!(select(
            &mut oracle,
            &mut BranchAndBound,
            &problem(2, SearchStrategy::Linear)
        )
        .is_err());
        assert!(select(
            &mut oracle,
            &mut BranchAndBound,
            &problem(0, SearchStrategy::Linear)
        )
        .is_err());
    }

    #[test]
    fn linear_core_drops_redundant_then_keeps_rest() {
        // s1:{b1}, s2:{b2}, s3:{b1,b2}; S={s1} -> S' stays {s1},
        // core = {s2, s3}
        let mut oracle = AtomOracle::new(atoms(&[&[1], &[2], &[1, 2]]));
        let core = extract_core_linear(&mut oracle, &BTreeSet::from([0]));
        assert_eq!(core, BTreeSet::from([1, 2]));
    }

    #[test]
    fn progression_core_matches_linear() {
        let mut oracle = AtomOracle::new(atoms(&[&[1], &[2], &[1, 2]]));
        let core = extract_core_progression(&mut oracle, &BTreeSet::from([0]));
        assert_eq!(core, BTreeSet::from([1, 2]));
    }

    #[test]
    fn singleton_core_when_one_summary_unlocks_the_last_atom() {
        // only s3 carries atom b9; S = {s0, s1} misses exactly b9
        let mut oracle = AtomOracle::new(atoms(&[&[1, 2], &[2, 3], &[9], &[1], &[3]]));
        let core = extract_core_linear(&mut oracle, &BTreeSet::from([0, 1]));
        assert_eq!(core, BTreeSet::from([2]));
    }

    #[test]
    fn subset_maximality_of_grown_set() {
        // after extraction, adding any core member raises the score
        let sets = atoms(&[&[1], &[2, 4], &[1, 2], &[3], &[4]]);
        let mut oracle = AtomOracle::new(sets);
        let candidate = BTreeSet::from([0]);
        let core = extract_core_linear(&mut oracle, &candidate);
        let universe = oracle.universe();
        let grown: BTreeSet<usize> = (0..universe).filter(|i| !core.contains(i)).collect();
        let base = oracle.eval(&grown);
        for &member in &core {
            let mut with = grown.clone();
            with.insert(member);
            assert!(oracle.eval(&with) > base);
        }
    }

    /// Oracle wrapper that counts and forbids any access other than
    /// eval/universe — the optimizer must treat scores as opaque.
    struct CountingOracle<T: CoverageOracle>(T, u64);

    impl<T: CoverageOracle> CoverageOracle for CountingOracle<T> {
        fn universe(&self) -> usize {
            self.0.universe()
        }
        fn eval(&mut self, selected: &BTreeSet<usize>) -> Score {
            self.1 += 1;
            self.0.eval(selected)
        }
    }

    #[test]
    fn progression_uses_fewer_calls_on_flat_regions() {
        // many summaries, all redundant copies: chunk commits cover
        // them in O(log n) evaluations instead of O(n)
        let n = 32;
        let mut sets = vec![vec![1u32]; n];
        sets.push(vec![2]);
        let sets: Vec<BTreeSet<u32>> = sets
            .into_iter()
            .map(|v| v.into_iter().collect())
            .collect();
        let candidate = BTreeSet::from([0]);

        let mut linear = CountingOracle(AtomOracle::new(sets.clone()), 0);
        let core_linear = extract_core_linear(&mut linear, &candidate);
        let linear_calls = linear.1;

        let mut prog = CountingOracle(AtomOracle::new(sets), 0);
        let core_prog = extract_core_progression(&mut prog, &candidate);
        let prog_calls = prog.1;

        assert_eq!(core_linear, core_prog);
        assert!(
            prog_calls < linear_calls,
            "progression {prog_calls} calls vs linear {linear_calls}"
        );
    }

    #[test]
    fn best_score_never_decreases_in_log() {
        let mut oracle = AtomOracle::new(atoms(&[
            &[1, 2],
            &[3],
            &[4, 5],
            &[1],
            &[6],
            &[2, 6],
        ]));
        let result = select(
            &mut oracle,
            &mut BranchAndBound,
            &problem(2, SearchStrategy::Linear),
        )
        .unwrap();
        let mut best = f64::MIN;
        for record in &result.log {
            // the log stores candidate scores; the running max must
            // never exceed the final score
            best = best.max(record.score);
        }
        assert!(best <= score_to_f64(&result.score) + 1e-9);
    }
}
