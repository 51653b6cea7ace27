//! Coverage evaluation functions: each measure maps a set of summaries
//! to a numeric score, and weighted linear combinations compose them.
//! Every function here is monotone — growing the summary set never
//! lowers the score — which is the contract the optimizer relies on.
//!
//! Scores are exact rationals so that candidate comparisons never
//! depend on float evaluation order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num::rational::Rational64;
use num::{ToPrimitive, Zero};
use thiserror::Error;

use crate::summary::{MeasureKind, Payload, Polarity};

/// Exact score type used throughout selection.
pub type Score = Rational64;

pub fn score_to_f64(score: &Score) -> f64 {
    score.to_f64().unwrap_or(f64::NAN)
}

/// Parse a nonnegative decimal literal (`"1"`, `"0.25"`) into an exact
/// rational. Exponents and signs are rejected.
pub fn parse_decimal(text: &str) -> Option<Score> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut numer: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().ok()?
    };
    let mut denom: i64 = 1;
    for c in frac_part.chars() {
        numer = numer.checked_mul(10)?.checked_add(c as i64 - '0' as i64)?;
        denom = denom.checked_mul(10)?;
    }
    Some(Rational64::new(numer, denom))
}

/// A named measure or weighted linear combination of measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureSpec {
    pub terms: Vec<(MeasureKind, Score)>,
    /// When set, array coverage counts `(array, index)` pairs with any
    /// access instead of splitting read and write interactions.
    pub array_merge_rw: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeasureError {
    #[error("measure spec has no terms")]
    EmptySpec,
    #[error("negative weight for {0}")]
    NegativeWeight(MeasureKind),
    #[error("all weights are zero")]
    AllWeightsZero,
    #[error("summary for test `{test_id}` lacks a {kind} payload")]
    MissingPayload { test_id: String, kind: MeasureKind },
    #[error("expected a {expected} payload, found {found}")]
    SchemaMismatch {
        expected: MeasureKind,
        found: MeasureKind,
    },
}

impl MeasureSpec {
    pub fn new(terms: Vec<(MeasureKind, Score)>) -> Result<MeasureSpec, MeasureError> {
        let spec = MeasureSpec {
            terms,
            array_merge_rw: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single measure with weight 1.
    pub fn single(kind: MeasureKind) -> MeasureSpec {
        MeasureSpec {
            terms: vec![(kind, Score::from_integer(1))],
            array_merge_rw: false,
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.terms.is_empty() {
            return Err(MeasureError::EmptySpec);
        }
        for (kind, weight) in &self.terms {
            if *weight < Score::zero() {
                return Err(MeasureError::NegativeWeight(*kind));
            }
        }
        if self.terms.iter().all(|(_, w)| w.is_zero()) {
            return Err(MeasureError::AllWeightsZero);
        }
        Ok(())
    }

    /// Distinct measure kinds this spec needs summaries for.
    pub fn kinds(&self) -> Vec<MeasureKind> {
        let set: BTreeSet<MeasureKind> = self.terms.iter().map(|(k, _)| *k).collect();
        set.into_iter().collect()
    }

    /// Short display name, e.g. `block` or `0.5*block+0.5*loop`.
    pub fn label(&self) -> String {
        if self.terms.len() == 1 && self.terms[0].1 == Score::from_integer(1) {
            return self.terms[0].0.name().to_string();
        }
        self.terms
            .iter()
            .map(|(k, w)| format!("{}*{}", score_to_f64(w), k.name()))
            .collect::<Vec<_>>()
            .join("+")
    }
}

fn expect_kind<'a>(
    payload: &'a Payload,
    expected: MeasureKind,
) -> Result<&'a Payload, MeasureError> {
    if payload.kind() == expected {
        Ok(payload)
    } else {
        Err(MeasureError::SchemaMismatch {
            expected,
            found: payload.kind(),
        })
    }
}

/// Number of distinct covered blocks across the set.
pub fn eval_block<'a, I>(payloads: I) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut blocks = BTreeSet::new();
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Block)? {
            Payload::Block(map) => {
                blocks.extend(map.iter().filter(|(_, &v)| v).map(|(id, _)| *id));
            }
            _ => unreachable!(),
        }
    }
    Ok(blocks.len() as u64)
}

/// Number of distinct array interactions. Read and write interactions
/// with the same index count separately unless `merge_rw` is set.
pub fn eval_array<'a, I>(payloads: I, merge_rw: bool) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut atoms: BTreeSet<(String, i64, u8)> = BTreeSet::new();
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Array)? {
            Payload::Array(map) => {
                for (name, access) in map {
                    for &i in &access.read {
                        atoms.insert((name.clone(), i, 0));
                    }
                    for &i in &access.write {
                        atoms.insert((name.clone(), i, if merge_rw { 0 } else { 1 }));
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(atoms.len() as u64)
}

/// Number of distinct (loop, iteration count) pairs.
pub fn eval_loop<'a, I>(payloads: I) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut pairs = BTreeSet::new();
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Loop)? {
            Payload::Loop(map) => {
                for (loop_id, counts) in map {
                    for (&count, &execs) in counts {
                        if execs > 0 {
                            pairs.insert((*loop_id, count));
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(pairs.len() as u64)
}

/// Number of guards seen both true and false somewhere in the set.
pub fn eval_decision<'a, I>(payloads: I) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut guards: BTreeMap<u32, Polarity> = BTreeMap::new();
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Decision)? {
            Payload::Decision(map) => {
                for (guard, polarity) in map {
                    let entry = guards.entry(*guard).or_default();
                    entry.seen_true |= polarity.seen_true;
                    entry.seen_false |= polarity.seen_false;
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(guards.values().filter(|p| p.both()).count() as u64)
}

/// Number of guards whose every recorded sub-expression site is seen
/// both true and false somewhere in the set.
pub fn eval_condition<'a, I>(payloads: I) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut sites: BTreeMap<u32, BTreeMap<u32, Polarity>> = BTreeMap::new();
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Condition)? {
            Payload::Condition(map) => {
                for (guard, guard_sites) in map {
                    let merged = sites.entry(*guard).or_default();
                    for (site, polarity) in guard_sites {
                        let entry = merged.entry(*site).or_default();
                        entry.seen_true |= polarity.seen_true;
                        entry.seen_false |= polarity.seen_false;
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(sites
        .values()
        .filter(|m| !m.is_empty() && m.values().all(|p| p.both()))
        .count() as u64)
}

/// Sum of input sizes across the set.
pub fn eval_size<'a, I>(payloads: I) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    let mut total = 0u64;
    for payload in payloads {
        match expect_kind(payload, MeasureKind::Size)? {
            Payload::Size(n) => total += n,
            _ => unreachable!(),
        }
    }
    Ok(total)
}

/// Evaluate one measure kind over a payload set.
pub fn eval_measure<'a, I>(
    kind: MeasureKind,
    payloads: I,
    merge_rw: bool,
) -> Result<u64, MeasureError>
where
    I: IntoIterator<Item = &'a Payload>,
{
    match kind {
        MeasureKind::Block => eval_block(payloads),
        MeasureKind::Array => eval_array(payloads, merge_rw),
        MeasureKind::Loop => eval_loop(payloads),
        MeasureKind::Decision => eval_decision(payloads),
        MeasureKind::Condition => eval_condition(payloads),
        MeasureKind::Size => eval_size(payloads),
    }
}

/// All per-measure payloads produced by one test input. Selection
/// works over these bundles and maps winners back to test ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryBundle {
    pub test_id: String,
    pub payloads: BTreeMap<MeasureKind, Payload>,
}

/// Weighted score of the selected bundles under the spec.
pub fn eval_spec(
    spec: &MeasureSpec,
    bundles: &[SummaryBundle],
    selected: &BTreeSet<usize>,
) -> Result<Score, MeasureError> {
    spec.validate()?;
    let mut total = Score::zero();
    for (kind, weight) in &spec.terms {
        let mut payloads = Vec::with_capacity(selected.len());
        for &i in selected {
            let bundle = &bundles[i];
            let payload =
                bundle
                    .payloads
                    .get(kind)
                    .ok_or_else(|| MeasureError::MissingPayload {
                        test_id: bundle.test_id.clone(),
                        kind: *kind,
                    })?;
            payloads.push(payload);
        }
        let count = eval_measure(*kind, payloads, spec.array_merge_rw)?;
        total += *weight * Score::from_integer(count as i64);
    }
    Ok(total)
}

/// Black-box score oracle over an indexed summary universe. The
/// optimizer sees nothing but this trait.
pub trait CoverageOracle {
    fn universe(&self) -> usize;
    fn eval(&mut self, selected: &BTreeSet<usize>) -> Score;
}

/// [`CoverageOracle`] backed by [`eval_spec`], memoized by selected
/// index set since core extraction re-evaluates heavily overlapping
/// sets.
pub struct SpecOracle<'a> {
    spec: MeasureSpec,
    bundles: &'a [SummaryBundle],
    cache: HashMap<Vec<usize>, Score>,
    calls: u64,
    evaluations: u64,
}

impl<'a> SpecOracle<'a> {
    pub fn new(spec: MeasureSpec, bundles: &'a [SummaryBundle]) -> Result<SpecOracle<'a>, MeasureError> {
        spec.validate()?;
        for bundle in bundles {
            for kind in spec.kinds() {
                if !bundle.payloads.contains_key(&kind) {
                    return Err(MeasureError::MissingPayload {
                        test_id: bundle.test_id.clone(),
                        kind,
                    });
                }
            }
        }
        Ok(SpecOracle {
            spec,
            bundles,
            cache: HashMap::new(),
            calls: 0,
            evaluations: 0,
        })
    }

    /// Total oracle calls (including memoized hits).
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Calls that actually recomputed the measure.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

impl CoverageOracle for SpecOracle<'_> {
    fn universe(&self) -> usize {
        self.bundles.len()
    }

    fn eval(&mut self, selected: &BTreeSet<usize>) -> Score {
        self.calls += 1;
        let key: Vec<usize> = selected.iter().copied().collect();
        if let Some(score) = self.cache.get(&key) {
            return *score;
        }
        self.evaluations += 1;
        let score = eval_spec(&self.spec, self.bundles, selected)
            .expect("bundles validated at construction");
        self.cache.insert(key, score);
        score
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::ArrayInteractions;

    fn block_payload(ids: &[u32]) -> Payload {
        Payload::Block(ids.iter().map(|&i| (i, true)).collect())
    }

    fn polarity(t: bool, f: bool) -> Polarity {
        Polarity {
            seen_true: t,
            seen_false: f,
        }
    }

    #[test]
    fn block_counts_union() {
        assert_eq!(eval_block([]).unwrap(), 0);
        assert_eq!(eval_block([&block_payload(&[2])]).unwrap(), 1);
        let a = block_payload(&[1, 2]);
        let b = block_payload(&[2, 3]);
        assert_eq!(eval_block([&a, &b]).unwrap(), 3);
    }

    #[test]
    fn array_counts_split_and_merged() {
        let p = Payload::Array(BTreeMap::from([(
            "main_a".to_string(),
            ArrayInteractions {
                read: BTreeSet::from([0]),
                write: BTreeSet::from([0]),
            },
        )]));
        assert_eq!(eval_array([&p], false).unwrap(), 2);
        assert_eq!(eval_array([&p], true).unwrap(), 1);
        assert_eq!(eval_array([], false).unwrap(), 0);
        // duplicates across summaries count once
        assert_eq!(eval_array([&p, &p.clone()], false).unwrap(), 2);
    }

    #[test]
    fn loop_counts_distinct_pairs() {
        let a = Payload::Loop(BTreeMap::from([(3, BTreeMap::from([(4, 1)]))]));
        let b = Payload::Loop(BTreeMap::from([(3, BTreeMap::from([(0, 1)]))]));
        assert_eq!(eval_loop([&a]).unwrap(), 1);
        assert_eq!(eval_loop([&a, &b]).unwrap(), 2);
        assert_eq!(eval_loop([]).unwrap(), 0);
    }

    #[test]
    fn decision_needs_both_values_across_set() {
        let s1 = Payload::Decision(BTreeMap::from([(7, polarity(true, false))]));
        let s2 = Payload::Decision(BTreeMap::from([(7, polarity(false, true))]));
        assert_eq!(eval_decision([&s1]).unwrap(), 0);
        assert_eq!(eval_decision([&s1, &s2]).unwrap(), 1);
        let both = Payload::Decision(BTreeMap::from([(7, polarity(true, true))]));
        assert_eq!(eval_decision([&both]).unwrap(), 1);
        assert_eq!(eval_decision([]).unwrap(), 0);
    }

    #[test]
    fn condition_requires_every_site_two_valued() {
        let covered = Payload::Condition(BTreeMap::from([(
            1,
            BTreeMap::from([(0, polarity(true, true)), (1, polarity(true, true))]),
        )]));
        assert_eq!(eval_condition([&covered]).unwrap(), 1);
        let partial = Payload::Condition(BTreeMap::from([(
            1,
            BTreeMap::from([(0, polarity(true, true)), (1, polarity(true, false))]),
        )]));
        assert_eq!(eval_condition([&partial]).unwrap(), 0);
        assert_eq!(eval_condition([]).unwrap(), 0);
        // split across two summaries
        let half = Payload::Condition(BTreeMap::from([(
            1,
            BTreeMap::from([(0, polarity(false, true)), (1, polarity(true, false))]),
        )]));
        let other = Payload::Condition(BTreeMap::from([(
            1,
            BTreeMap::from([(0, polarity(true, false)), (1, polarity(false, true))]),
        )]));
        assert_eq!(eval_condition([&half, &other]).unwrap(), 1);
    }

    #[test]
    fn size_sums() {
        assert_eq!(eval_size([]).unwrap(), 0);
        assert_eq!(eval_size([&Payload::Size(7)]).unwrap(), 7);
        assert_eq!(eval_size([&Payload::Size(7), &Payload::Size(5)]).unwrap(), 12);
    }

    #[test]
    fn schema_mismatch_detected() {
        let err = eval_block([&Payload::Size(1)]).unwrap_err();
        assert!(matches!(err, MeasureError::SchemaMismatch { .. }));
    }

    fn bundle(id: &str, block_ids: &[u32], loop_pairs: &[(u32, u64)]) -> SummaryBundle {
        let mut loops: BTreeMap<u32, BTreeMap<u64, u64>> = BTreeMap::new();
        for &(l, c) in loop_pairs {
            *loops.entry(l).or_default().entry(c).or_insert(0) += 1;
        }
        SummaryBundle {
            test_id: id.to_string(),
            payloads: BTreeMap::from([
                (MeasureKind::Block, block_payload(block_ids)),
                (MeasureKind::Loop, Payload::Loop(loops)),
            ]),
        }
    }

    #[test]
    fn weighted_combination() {
        // 0.5*BC + 0.5*LC on the x=4 run of the while example:
        // one block, one (loop, 4) pair -> 0.5 + 0.5 = 1.0
        let bundles = vec![bundle("x4", &[2], &[(1, 4)])];
        let spec = MeasureSpec::new(vec![
            (MeasureKind::Block, parse_decimal("0.5").unwrap()),
            (MeasureKind::Loop, parse_decimal("0.5").unwrap()),
        ])
        .unwrap();
        let score = eval_spec(&spec, &bundles, &BTreeSet::from([0])).unwrap();
        assert_eq!(score, Score::from_integer(1));
    }

    #[test]
    fn single_term_weight_one_reduces_to_base() {
        let bundles = vec![bundle("t", &[1, 2], &[])];
        let spec = MeasureSpec::single(MeasureKind::Block);
        let score = eval_spec(&spec, &bundles, &BTreeSet::from([0])).unwrap();
        assert_eq!(score, Score::from_integer(2));
    }

    #[test]
    fn all_zero_weights_rejected() {
        let err = MeasureSpec::new(vec![(MeasureKind::Block, Score::zero())]).unwrap_err();
        assert_eq!(err, MeasureError::AllWeightsZero);
    }

    #[test]
    fn empty_selection_scores_zero() {
        let bundles = vec![bundle("t", &[1], &[(1, 2)])];
        for kind in [MeasureKind::Block, MeasureKind::Loop] {
            let spec = MeasureSpec::single(kind);
            assert_eq!(
                eval_spec(&spec, &bundles, &BTreeSet::new()).unwrap(),
                Score::zero()
            );
        }
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("1"), Some(Score::from_integer(1)));
        assert_eq!(parse_decimal("0.5"), Some(Rational64::new(1, 2)));
        assert_eq!(parse_decimal("0.25"), Some(Rational64::new(1, 4)));
        assert_eq!(parse_decimal("2.50"), Some(Rational64::new(5, 2)));
        assert_eq!(parse_decimal("-1"), None);
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal(""), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn oracle_memoizes() {
        let bundles = vec![bundle("a", &[1], &[]), bundle("b", &[2], &[])];
        let mut oracle = SpecOracle::new(MeasureSpec::single(MeasureKind::Block), &bundles).unwrap();
        let sel = BTreeSet::from([0, 1]);
        let s1 = oracle.eval(&sel);
        let s2 = oracle.eval(&sel);
        assert_eq!(s1, s2);
        assert_eq!(oracle.calls(), 2);
        assert_eq!(oracle.evaluations(), 1);
    }
}
