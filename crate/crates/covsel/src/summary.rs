//! Coverage summaries: the events emitted by an instrumented run, the
//! per-measure summary builders that fold those events into JSON-shaped
//! payloads, and the payload schemas themselves.
//!
//! One builder instance observes one execution and finalizes into one
//! payload. Builders are deliberately small; adding a measure means
//! adding a builder and an evaluation function.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{CfKind, StmtId};
use crate::interp::{InputValue, TestInput};

/// The built-in coverage measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Block,
    Array,
    Loop,
    Decision,
    Condition,
    Size,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 6] = [
        MeasureKind::Block,
        MeasureKind::Array,
        MeasureKind::Loop,
        MeasureKind::Decision,
        MeasureKind::Condition,
        MeasureKind::Size,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Block => "block",
            MeasureKind::Array => "array",
            MeasureKind::Loop => "loop",
            MeasureKind::Decision => "decision",
            MeasureKind::Condition => "condition",
            MeasureKind::Size => "size",
        }
    }
}

impl fmt::Display for MeasureKind {
    fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = UnknownMeasure;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(MeasureKind::Block),
            "array" => Ok(MeasureKind::Array),
            "loop" => Ok(MeasureKind::Loop),
            "decision" => Ok(MeasureKind::Decision),
            "condition" => Ok(MeasureKind::Condition),
            "size" => Ok(MeasureKind::Size),
            _ => Err(UnknownMeasure(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown measure `{0}` (expected block, array, loop, decision, condition, or size)")]
pub struct UnknownMeasure(pub String);

/// A coverage API event observed during execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event<'a> {
    Begin { kind: CfKind, id: StmtId },
    End { kind: CfKind, id: StmtId },
    Block { id: StmtId },
    Guard { guard_id: StmtId, value: bool },
    Cond { guard_id: StmtId, index: u32, value: bool },
    ArrRead { name: &'a str, handle: i64, index: i64 },
    ArrWrite { name: &'a str, handle: i64, index: i64 },
    CallMalloc { size: i64 },
}

/// Which truth values a site has been observed to take.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polarity {
    #[serde(rename = "true")]
    pub seen_true: bool,
    #[serde(rename = "false")]
    pub seen_false: bool,
}

impl Polarity {
    pub fn record(&mut self, value: bool) {
        if value {
            self.seen_true = true;
        } else {
            self.seen_false = true;
        }
    }

    pub fn both(&self) -> bool {
        self.seen_true && self.seen_false
    }
}

/// Read/write index sets for one array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayInteractions {
    pub read: BTreeSet<i64>,
    pub write: BTreeSet<i64>,
}

/// One summary payload. The JSON schema depends on the measure:
///
/// - block: `{"2": true}`
/// - array: `{"main_a": {"read": [0], "write": [0]}}`
/// - loop: `{"3": {"4": 1}}` (loop id -> iteration count -> executions)
/// - decision: `{"5": {"true": true, "false": false}}`
/// - condition: `{"5": {"0": {"true": true, "false": true}}}`
/// - size: `{"size": 7}`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Block(BTreeMap<StmtId, bool>),
    Array(BTreeMap<String, ArrayInteractions>),
    Loop(BTreeMap<StmtId, BTreeMap<u64, u64>>),
    Decision(BTreeMap<StmtId, Polarity>),
    Condition(BTreeMap<StmtId, BTreeMap<u32, Polarity>>),
    Size(u64),
}

#[derive(Serialize, Deserialize)]
struct SizeDoc {
    size: u64,
}

#[derive(Debug, Error)]
pub enum PayloadError {
    #[error("payload does not match the {kind} schema: {source}")]
    Schema {
        kind: MeasureKind,
        source: serde_json::Error,
    },
}

impl Payload {
    pub fn kind(&self) -> MeasureKind {
        match self {
            Payload::Block(_) => MeasureKind::Block,
            Payload::Array(_) => MeasureKind::Array,
            Payload::Loop(_) => MeasureKind::Loop,
            Payload::Decision(_) => MeasureKind::Decision,
            Payload::Condition(_) => MeasureKind::Condition,
            Payload::Size(_) => MeasureKind::Size,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Payload::Block(m) => serde_json::to_value(m),
            Payload::Array(m) => serde_json::to_value(m),
            Payload::Loop(m) => serde_json::to_value(m),
            Payload::Decision(m) => serde_json::to_value(m),
            Payload::Condition(m) => serde_json::to_value(m),
            Payload::Size(n) => serde_json::to_value(SizeDoc { size: *n }),
        }
        .expect("payload maps serialize")
    }

    pub fn from_json(kind: MeasureKind, value: &serde_json::Value) -> Result<Payload, PayloadError> {
        let schema = |source| PayloadError::Schema { kind, source };
        Ok(match kind {
            MeasureKind::Block => {
                Payload::Block(serde_json::from_value(value.clone()).map_err(schema)?)
            }
            MeasureKind::Array => {
                Payload::Array(serde_json::from_value(value.clone()).map_err(schema)?)
            }
            MeasureKind::Loop => {
                Payload::Loop(serde_json::from_value(value.clone()).map_err(schema)?)
            }
            MeasureKind::Decision => {
                Payload::Decision(serde_json::from_value(value.clone()).map_err(schema)?)
            }
            MeasureKind::Condition => {
                Payload::Condition(serde_json::from_value(value.clone()).map_err(schema)?)
            }
            MeasureKind::Size => {
                let doc: SizeDoc = serde_json::from_value(value.clone()).map_err(schema)?;
                Payload::Size(doc.size)
            }
        })
    }
}

/// One coverage summary: the digest of one instrumented run for one
/// measure on one test input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageSummary {
    pub measure: MeasureKind,
    pub test_id: String,
    pub payload: Payload,
}

/// Folds API events into a payload. One instance per (measure, run).
pub trait SummaryBuilder {
    fn kind(&self) -> MeasureKind;
    fn on_event(&mut self, event: &Event);
    fn finalize(&mut self, input: &TestInput) -> Payload;
}

/// Fresh builder for a measure.
pub fn builder_for(kind: MeasureKind) -> Box<dyn SummaryBuilder> {
    match kind {
        MeasureKind::Block => Box::<BlockBuilder>::default(),
        MeasureKind::Array => Box::<ArrayBuilder>::default(),
        MeasureKind::Loop => Box::<LoopBuilder>::default(),
        MeasureKind::Decision => Box::<DecisionBuilder>::default(),
        MeasureKind::Condition => Box::<ConditionBuilder>::default(),
        MeasureKind::Size => Box::<SizeBuilder>::default(),
    }
}

/// BLOCK(id) marks the block covered; everything else is ignored.
#[derive(Default)]
pub struct BlockBuilder {
    covered: BTreeMap<StmtId, bool>,
}

impl SummaryBuilder for BlockBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Block
    }

    fn on_event(&mut self, event: &Event) {
        if let Event::Block { id } = event {
            self.covered.insert(*id, true);
        }
    }

    fn finalize(&mut self, _input: &TestInput) -> Payload {
        Payload::Block(std::mem::take(&mut self.covered))
    }
}

/// ARR_READ/ARR_WRITE collect the touched indices per static array
/// name. `:` in static names is normalized to `_` for JSON keys
/// (`main:a` -> `main_a`).
#[derive(Default)]
pub struct ArrayBuilder {
    arrays: BTreeMap<String, ArrayInteractions>,
}

fn json_array_key(name: &str) -> String {
    name.replace(':', "_")
}

impl SummaryBuilder for ArrayBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Array
    }

    fn on_event(&mut self, event: &Event) {
        match event {
            Event::ArrRead { name, index, .. } => {
                self.arrays
                    .entry(json_array_key(name))
                    .or_default()
                    .read
                    .insert(*index);
            }
            Event::ArrWrite { name, index, .. } => {
                self.arrays
                    .entry(json_array_key(name))
                    .or_default()
                    .write
                    .insert(*index);
            }
            _ => {}
        }
    }

    fn finalize(&mut self, _input: &TestInput) -> Payload {
        Payload::Array(std::mem::take(&mut self.arrays))
    }
}

enum LoopFrame {
    Active { id: StmtId, iterations: u64 },
    Inert,
}

/// Counts iterations per loop execution with a stack of counters, one
/// per active control-flow statement. BEGIN("WHILE") pushes a counter,
/// a true GUARD with that counter on top increments it, and the
/// matching END commits `payload[loop][count] += 1`. Executions cut
/// short by a fault never reach END and are not recorded.
#[derive(Default)]
pub struct LoopBuilder {
    stack: Vec<LoopFrame>,
    counts: BTreeMap<StmtId, BTreeMap<u64, u64>>,
}

impl SummaryBuilder for LoopBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Loop
    }

    fn on_event(&mut self, event: &Event) {
        match event {
            Event::Begin { kind: CfKind::While, id } => self.stack.push(LoopFrame::Active {
                id: *id,
                iterations: 0,
            }),
            Event::Begin { kind: CfKind::If, .. } => self.stack.push(LoopFrame::Inert),
            Event::Guard { value: true, .. } => {
                if let Some(LoopFrame::Active { iterations, .. }) = self.stack.last_mut() {
                    *iterations += 1;
                }
            }
            Event::End { .. } => {
                if let Some(LoopFrame::Active { id, iterations }) = self.stack.pop() {
                    *self
                        .counts
                        .entry(id)
                        .or_default()
                        .entry(iterations)
                        .or_insert(0) += 1;
                }
            }
            _ => {}
        }
    }

    fn finalize(&mut self, _input: &TestInput) -> Payload {
        self.stack.clear();
        Payload::Loop(std::mem::take(&mut self.counts))
    }
}

/// GUARD(gid, v) records which truth values each guard has taken.
#[derive(Default)]
pub struct DecisionBuilder {
    guards: BTreeMap<StmtId, Polarity>,
}

impl SummaryBuilder for DecisionBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Decision
    }

    fn on_event(&mut self, event: &Event) {
        if let Event::Guard { guard_id, value } = event {
            self.guards.entry(*guard_id).or_default().record(*value);
        }
    }

    fn finalize(&mut self, _input: &TestInput) -> Payload {
        Payload::Decision(std::mem::take(&mut self.guards))
    }
}

/// COND(gid, j, v) records truth values per static sub-expression
/// site. A guard observed only through GUARD (no COND sites at all)
/// falls back to a single site 0 fed by its guard values, so atomic
/// guards stay coverable under alternative instrumentations.
#[derive(Default)]
pub struct ConditionBuilder {
    sites: BTreeMap<StmtId, BTreeMap<u32, Polarity>>,
    guards: BTreeMap<StmtId, Polarity>,
}

impl SummaryBuilder for ConditionBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Condition
    }

    fn on_event(&mut self, event: &Event) {
        match event {
            Event::Cond { guard_id, index, value } => {
                self.sites
                    .entry(*guard_id)
                    .or_default()
                    .entry(*index)
                    .or_default()
                    .record(*value);
            }
            Event::Guard { guard_id, value } => {
                self.guards.entry(*guard_id).or_default().record(*value);
            }
            _ => {}
        }
    }

    fn finalize(&mut self, _input: &TestInput) -> Payload {
        let mut sites = std::mem::take(&mut self.sites);
        for (guard_id, polarity) in std::mem::take(&mut self.guards) {
            sites
                .entry(guard_id)
                .or_insert_with(|| BTreeMap::from([(0, polarity)]));
        }
        Payload::Condition(sites)
    }
}

/// Scalar-value count of the test input; arrays contribute their
/// length. Ignores all events.
#[derive(Default)]
pub struct SizeBuilder;

impl SummaryBuilder for SizeBuilder {
    fn kind(&self) -> MeasureKind {
        MeasureKind::Size
    }

    fn on_event(&mut self, _event: &Event) {}

    fn finalize(&mut self, input: &TestInput) -> Payload {
        let total = input
            .bindings
            .values()
            .map(|v| match v {
                InputValue::Int(_) => 1u64,
                InputValue::Array(items) => items.len() as u64,
            })
            .sum();
        Payload::Size(total)
    }
}
