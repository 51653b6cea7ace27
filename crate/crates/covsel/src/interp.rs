//! Tree-walking interpreter for MiniC, instrumented or plain.
//!
//! Values are 64-bit signed integers. Arrays live in an arena and are
//! referred to by integer handles (1-based; 0 behaves like NULL), so
//! pointer-ish code keeps C-like semantics without a separate value
//! type. Unbound variables read as 0, arrays are zero-initialized, and
//! arithmetic wraps. Division or modulo by zero, out-of-bounds array
//! access, and negative allocation sizes halt execution with a runtime
//! fault; a configurable step limit bounds runaway loops.
//!
//! Step accounting only charges statements with an assigned id plus one
//! step per guard evaluation, so an instrumented run observes exactly
//! the same step budget as the plain run it mirrors.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ApiStmt, BinOp, Expr, IncDec, InputKind, Program, Stmt, StmtKind, UnOp};
use crate::instrument::InstrumentedProgram;
use crate::summary::{CoverageSummary, Event, SummaryBuilder};

/// Largest single allocation, in elements. Bigger requests return a
/// NULL handle, like malloc failing.
const MAX_ALLOC_LEN: i64 = 1 << 22;
/// Total arena budget across all allocations, in elements.
const MAX_ARENA_LEN: usize = 1 << 24;
/// Printed-line budget; exceeding it counts as running out of steps.
const MAX_OUTPUT_LINES: usize = 1 << 20;

/// One test input: a name and the values bound to the program's
/// declared inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInput {
    pub id: String,
    pub bindings: BTreeMap<String, InputValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputValue {
    Int(i64),
    Array(Vec<i64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeFault {
    OobRead,
    OobWrite,
    DivByZero,
    NegativeMalloc,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Fault(RuntimeFault),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Fault(RuntimeFault::OobRead) => "oob_read",
            RunStatus::Fault(RuntimeFault::OobWrite) => "oob_write",
            RunStatus::Fault(RuntimeFault::DivByZero) => "div_by_zero",
            RunStatus::Fault(RuntimeFault::NegativeMalloc) => "negative_malloc",
            RunStatus::Fault(RuntimeFault::StepLimit) => "step_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    /// Printed integer lines, truncated at the fault if any.
    pub output: Vec<i64>,
    pub status: RunStatus,
    pub steps: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("test `{test_id}` does not bind declared input `{name}`")]
    MissingInput { test_id: String, name: String },
    #[error("test `{test_id}` binds `{name}` with the wrong shape (scalar vs array)")]
    InputShape { test_id: String, name: String },
    #[error("step limit must be positive")]
    ZeroStepLimit,
}

/// A program to execute: plain or instrumented.
#[derive(Debug, Clone, Copy)]
pub enum ProgramRef<'a> {
    Plain(&'a Program),
    Instrumented(&'a InstrumentedProgram),
}

impl<'a> ProgramRef<'a> {
    fn inputs(&self) -> &'a [(String, InputKind)] {
        match self {
            ProgramRef::Plain(p) => &p.inputs,
            ProgramRef::Instrumented(p) => &p.origin.inputs,
        }
    }

    fn body(&self) -> &'a [Stmt] {
        match self {
            ProgramRef::Plain(p) => &p.body,
            ProgramRef::Instrumented(p) => &p.body,
        }
    }
}

/// Run a program on a test input, streaming API events into `sink`.
pub fn run(
    program: ProgramRef,
    test: &TestInput,
    step_limit: u64,
    sink: &mut dyn FnMut(&Event),
) -> Result<ExecutionResult, ExecError> {
    if step_limit == 0 {
        return Err(ExecError::ZeroStepLimit);
    }
    let mut interp = Interp {
        vars: HashMap::new(),
        arena: Vec::new(),
        arena_len: 0,
        output: Vec::new(),
        steps: 0,
        step_limit,
        sink,
    };
    for (name, kind) in program.inputs() {
        let value = test
            .bindings
            .get(name)
            .ok_or_else(|| ExecError::MissingInput {
                test_id: test.id.clone(),
                name: name.clone(),
            })?;
        match (kind, value) {
            (InputKind::Scalar, InputValue::Int(v)) => {
                interp.vars.insert(name.clone(), *v);
            }
            (InputKind::Array, InputValue::Array(items)) => {
                let handle = interp.alloc_exact(items.clone());
                interp.vars.insert(name.clone(), handle);
            }
            _ => {
                return Err(ExecError::InputShape {
                    test_id: test.id.clone(),
                    name: name.clone(),
                })
            }
        }
    }
    let status = match interp.stmts(program.body()) {
        Ok(()) => RunStatus::Ok,
        Err(fault) => RunStatus::Fault(fault),
    };
    Ok(ExecutionResult {
        output: interp.output,
        status,
        steps: interp.steps,
    })
}

/// Run a program with summary builders attached; each builder
/// finalizes into one summary, kept even when the run faults.
pub fn execute(
    program: ProgramRef,
    test: &TestInput,
    builders: &mut [Box<dyn SummaryBuilder>],
    step_limit: u64,
) -> Result<(ExecutionResult, Vec<CoverageSummary>), ExecError> {
    let mut sink = |event: &Event| {
        for builder in builders.iter_mut() {
            builder.on_event(event);
        }
    };
    let result = run(program, test, step_limit, &mut sink)?;
    let summaries = builders
        .iter_mut()
        .map(|builder| CoverageSummary {
            measure: builder.kind(),
            test_id: test.id.clone(),
            payload: builder.finalize(test),
        })
        .collect();
    Ok((result, summaries))
}

struct Interp<'a> {
    vars: HashMap<String, i64>,
    arena: Vec<Vec<i64>>,
    arena_len: usize,
    output: Vec<i64>,
    steps: u64,
    step_limit: u64,
    sink: &'a mut dyn FnMut(&Event),
}

type Exec = Result<(), RuntimeFault>;
type Eval = Result<i64, RuntimeFault>;

impl Interp<'_> {
    fn charge(&mut self) -> Exec {
        self.steps += 1;
        if self.steps > self.step_limit {
            Err(RuntimeFault::StepLimit)
        } else {
            Ok(())
        }
    }

    fn alloc_exact(&mut self, items: Vec<i64>) -> i64 {
        self.arena_len += items.len();
        self.arena.push(items);
        self.arena.len() as i64
    }

    fn alloc(&mut self, len: i64) -> Eval {
        if len < 0 {
            return Err(RuntimeFault::NegativeMalloc);
        }
        if len > MAX_ALLOC_LEN || self.arena_len + len as usize > MAX_ARENA_LEN {
            return Ok(0); // NULL
        }
        Ok(self.alloc_exact(vec![0; len as usize]))
    }

    fn read_var(&self, name: &str) -> i64 {
        self.vars.get(name).copied().unwrap_or(0)
    }

    fn array_get(&self, handle: i64, index: i64) -> Option<i64> {
        let arr = self.array(handle)?;
        if index < 0 || index as usize >= arr.len() {
            return None;
        }
        Some(arr[index as usize])
    }

    fn array(&self, handle: i64) -> Option<&Vec<i64>> {
        if handle < 1 || handle as usize > self.arena.len() {
            return None;
        }
        Some(&self.arena[handle as usize - 1])
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Exec {
        for stmt in stmts {
            self.stmt(stmt)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Exec {
        if stmt.id > 0 {
            self.charge()?;
        }
        match &stmt.kind {
            StmtKind::Assign { name, value } => {
                let v = self.eval(value)?;
                self.vars.insert(name.clone(), v);
            }
            StmtKind::Print { value } => {
                let v = self.eval(value)?;
                if self.output.len() >= MAX_OUTPUT_LINES {
                    return Err(RuntimeFault::StepLimit);
                }
                self.output.push(v);
            }
            StmtKind::Malloc { target, size } => {
                let n = self.eval(size)?;
                let handle = self.alloc(n)?;
                self.vars.insert(target.clone(), handle);
            }
            StmtKind::ArrayWrite { array, index, value } => {
                let idx = self.eval(index)?;
                let v = self.eval(value)?;
                let handle = self.read_var(array);
                let ok = self
                    .array(handle)
                    .map(|arr| idx >= 0 && (idx as usize) < arr.len())
                    .unwrap_or(false);
                if !ok {
                    return Err(RuntimeFault::OobWrite);
                }
                self.arena[handle as usize - 1][idx as usize] = v;
            }
            StmtKind::ArrayRead { target, array, index } => {
                let handle = self.eval(array)?;
                let idx = self.eval(index)?;
                let v = self.array_get(handle, idx).ok_or(RuntimeFault::OobRead)?;
                self.vars.insert(target.clone(), v);
            }
            StmtKind::If {
                guard,
                then_block,
                else_block,
            } => {
                self.charge()?;
                let v = self.eval(guard)?;
                if v != 0 {
                    self.stmts(&then_block.stmts)?;
                } else {
                    self.stmts(&else_block.stmts)?;
                }
            }
            StmtKind::While { guard, body } => loop {
                self.charge()?;
                let v = self.eval(guard)?;
                if v == 0 {
                    break;
                }
                self.stmts(&body.stmts)?;
            },
            StmtKind::Api(call) => self.api(call)?,
        }
        Ok(())
    }

    fn api(&mut self, call: &ApiStmt) -> Exec {
        match call {
            ApiStmt::Begin { kind, id } => (self.sink)(&Event::Begin { kind: *kind, id: *id }),
            ApiStmt::End { kind, id } => (self.sink)(&Event::End { kind: *kind, id: *id }),
            ApiStmt::Block { id } => (self.sink)(&Event::Block { id: *id }),
            ApiStmt::ArrRead { name, array, index } => {
                let handle = self.eval(array)?;
                let idx = self.eval(index)?;
                (self.sink)(&Event::ArrRead {
                    name,
                    handle,
                    index: idx,
                });
            }
            ApiStmt::ArrWrite { name, array, index } => {
                let handle = self.eval(array)?;
                let idx = self.eval(index)?;
                (self.sink)(&Event::ArrWrite {
                    name,
                    handle,
                    index: idx,
                });
            }
            ApiStmt::CallMalloc { size } => {
                let sz = self.eval(size)?;
                (self.sink)(&Event::CallMalloc { size: sz });
            }
        }
        Ok(())
    }

    fn eval(&mut self, expr: &Expr) -> Eval {
        match expr {
            Expr::Int(v) => Ok(*v),
            Expr::Var(name) => Ok(self.read_var(name)),
            Expr::PostIncDec { name, op } => {
                let old = self.read_var(name);
                let new = match op {
                    IncDec::Inc => old.wrapping_add(1),
                    IncDec::Dec => old.wrapping_sub(1),
                };
                self.vars.insert(name.clone(), new);
                Ok(old)
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(operand)?;
                Ok(match op {
                    UnOp::Neg => v.wrapping_neg(),
                    UnOp::Not => (v == 0) as i64,
                })
            }
            Expr::Binary { op, left, right } => match op {
                BinOp::And => {
                    let l = self.eval(left)?;
                    if l == 0 {
                        Ok(0)
                    } else {
                        Ok((self.eval(right)? != 0) as i64)
                    }
                }
                BinOp::Or => {
                    let l = self.eval(left)?;
                    if l != 0 {
                        Ok(1)
                    } else {
                        Ok((self.eval(right)? != 0) as i64)
                    }
                }
                _ => {
                    let l = self.eval(left)?;
                    let r = self.eval(right)?;
                    Ok(match op {
                        BinOp::Add => l.wrapping_add(r),
                        BinOp::Sub => l.wrapping_sub(r),
                        BinOp::Mul => l.wrapping_mul(r),
                        BinOp::Div => {
                            if r == 0 {
                                return Err(RuntimeFault::DivByZero);
                            }
                            l.wrapping_div(r)
                        }
                        BinOp::Rem => {
                            if r == 0 {
                                return Err(RuntimeFault::DivByZero);
                            }
                            l.wrapping_rem(r)
                        }
                        BinOp::Lt => (l < r) as i64,
                        BinOp::Le => (l <= r) as i64,
                        BinOp::Gt => (l > r) as i64,
                        BinOp::Ge => (l >= r) as i64,
                        BinOp::Eq => (l == r) as i64,
                        BinOp::Ne => (l != r) as i64,
                        BinOp::And | BinOp::Or => unreachable!("handled above"),
                    })
                }
            },
            Expr::Guard { guard_id, inner } => {
                let v = self.eval(inner)?;
                (self.sink)(&Event::Guard {
                    guard_id: *guard_id,
                    value: v != 0,
                });
                Ok(v)
            }
            Expr::Cond { guard_id, index, inner } => {
                let v = self.eval(inner)?;
                (self.sink)(&Event::Cond {
                    guard_id: *guard_id,
                    index: *index,
                    value: v != 0,
                });
                Ok(v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn test_input(pairs: &[(&str, InputValue)]) -> TestInput {
        TestInput {
            id: "t".into(),
            bindings: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    fn run_plain(src: &str, input: &TestInput, limit: u64) -> ExecutionResult {
        let p = parse(src).unwrap();
        run(ProgramRef::Plain(&p), input, limit, &mut |_| {}).unwrap()
    }

    #[test]
    fn countdown_prints_and_halts() {
        let r = run_plain(
            "input x;\nwhile (x > 0) { print(x); x = x - 1; }",
            &test_input(&[("x", InputValue::Int(3))]),
            1000,
        );
        assert_eq!(r.output, vec![3, 2, 1]);
        assert_eq!(r.status, RunStatus::Ok);
    }

    #[test]
    fn division_by_zero_faults_and_keeps_output() {
        let r = run_plain(
            "print(1); x = 4 / 0; print(2);",
            &test_input(&[]),
            1000,
        );
        assert_eq!(r.output, vec![1]);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::DivByZero));
    }

    #[test]
    fn array_bounds_checked() {
        let r = run_plain(
            "a = malloc(3); a[2] = 7; x = a[2]; print(x); a[3] = 1;",
            &test_input(&[]),
            1000,
        );
        assert_eq!(r.output, vec![7]);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::OobWrite));

        let r = run_plain("a = malloc(3); x = a[-1];", &test_input(&[]), 1000);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::OobRead));
    }

    #[test]
    fn null_handle_dereference_is_oob() {
        // b is unbound (0, i.e. NULL)
        let r = run_plain("x = b[0];", &test_input(&[]), 1000);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::OobRead));
    }

    #[test]
    fn negative_malloc_faults() {
        let r = run_plain("a = malloc(0 - 1);", &test_input(&[]), 1000);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::NegativeMalloc));
    }

    #[test]
    fn oversized_malloc_returns_null() {
        let r = run_plain(
            "a = malloc(99999999999); print(a); x = a[0];",
            &test_input(&[]),
            1000,
        );
        assert_eq!(r.output, vec![0]);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::OobRead));
    }

    #[test]
    fn step_limit_hits_infinite_loop() {
        let r = run_plain("while (1) { x = x + 1; }", &test_input(&[]), 500);
        assert_eq!(r.status, RunStatus::Fault(RuntimeFault::StepLimit));
        assert!(r.steps >= 500);
    }

    #[test]
    fn short_circuit_skips_right_operand() {
        // 0 && (1 / 0): the division must never run
        let r = run_plain("x = 0 && 1 / 0; print(x);", &test_input(&[]), 1000);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.output, vec![0]);
        let r = run_plain("x = 1 || 1 / 0; print(x);", &test_input(&[]), 1000);
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.output, vec![1]);
    }

    #[test]
    fn post_decrement_returns_old_value() {
        let r = run_plain(
            "input x;\nprint(x--); print(x);",
            &test_input(&[("x", InputValue::Int(4))]),
            1000,
        );
        assert_eq!(r.output, vec![4, 3]);
    }

    #[test]
    fn missing_input_binding_is_setup_error() {
        let p = parse("input x;\nprint(x);").unwrap();
        let err = run(
            ProgramRef::Plain(&p),
            &test_input(&[]),
            1000,
            &mut |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, ExecError::MissingInput { .. }));
    }

    #[test]
    fn input_shape_mismatch_is_setup_error() {
        let p = parse("input a[];\nx = a[0];").unwrap();
        let err = run(
            ProgramRef::Plain(&p),
            &test_input(&[("a", InputValue::Int(3))]),
            1000,
            &mut |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, ExecError::InputShape { .. }));
    }
}
