//! Source-to-source instrumentation: brackets every `if`/`while` with
//! BEGIN/END, marks each branch with BLOCK, wraps guards in GUARD and
//! their Boolean sub-expressions in COND, and reports array traffic and
//! allocations through ARR_READ/ARR_WRITE/CALL_MALLOC.
//!
//! Array index and handle expressions are hoisted into fresh `__ts_`
//! temporaries first so the API call never re-evaluates user code.
//! GUARD and COND carry static identifiers (the guard's statement id,
//! and a per-guard sub-expression index assigned left-to-right) so that
//! decision and condition summaries can key on the evaluation site even
//! under short-circuiting.

use thiserror::Error;

use crate::ast::{
    ApiStmt, BinOp, Block, CfKind, Expr, Program, Stmt, StmtId, StmtKind, UnOp, TEMP_PREFIX,
};

/// An instrumented program together with the program it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentedProgram {
    pub origin: Program,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("program is already instrumented")]
    AlreadyInstrumented,
}

/// Instrument a parsed program. Rejects a second application.
pub fn instrument(program: &Program) -> Result<InstrumentedProgram, InstrumentError> {
    if program.is_instrumented() {
        return Err(InstrumentError::AlreadyInstrumented);
    }
    let mut ctx = Ctx { next_temp: 0 };
    let body = ctx.stmts(&program.body);
    Ok(InstrumentedProgram {
        origin: program.clone(),
        body,
    })
}

struct Ctx {
    next_temp: u32,
}

impl Ctx {
    fn fresh(&mut self, role: &str) -> String {
        let name = format!("{TEMP_PREFIX}{role}{}", self.next_temp);
        self.next_temp += 1;
        name
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        for stmt in stmts {
            self.stmt(stmt, &mut out);
        }
        out
    }

    fn branch(&mut self, block: &Block) -> Block {
        let mut stmts = vec![Stmt::new(StmtKind::Api(ApiStmt::Block { id: block.id }))];
        stmts.extend(self.stmts(&block.stmts));
        Block {
            id: block.id,
            stmts,
        }
    }

    fn stmt(&mut self, stmt: &Stmt, out: &mut Vec<Stmt>) {
        match &stmt.kind {
            StmtKind::If {
                guard,
                then_block,
                else_block,
            } => {
                out.push(api(ApiStmt::Begin {
                    kind: CfKind::If,
                    id: stmt.id,
                }));
                out.push(Stmt {
                    id: stmt.id,
                    kind: StmtKind::If {
                        guard: instrument_guard(guard, stmt.id),
                        then_block: self.branch(then_block),
                        else_block: self.branch(else_block),
                    },
                });
                out.push(api(ApiStmt::End {
                    kind: CfKind::If,
                    id: stmt.id,
                }));
            }
            StmtKind::While { guard, body } => {
                out.push(api(ApiStmt::Begin {
                    kind: CfKind::While,
                    id: stmt.id,
                }));
                out.push(Stmt {
                    id: stmt.id,
                    kind: StmtKind::While {
                        guard: instrument_guard(guard, stmt.id),
                        body: self.branch(body),
                    },
                });
                out.push(api(ApiStmt::End {
                    kind: CfKind::While,
                    id: stmt.id,
                }));
            }
            StmtKind::ArrayWrite { array, index, value } => {
                let idx = self.fresh("idx");
                out.push(assign(&idx, index.clone()));
                out.push(Stmt {
                    id: stmt.id,
                    kind: StmtKind::ArrayWrite {
                        array: array.clone(),
                        index: Expr::var(&idx),
                        value: value.clone(),
                    },
                });
                out.push(api(ApiStmt::ArrWrite {
                    name: static_array_name(&Expr::var(array)),
                    array: Expr::var(array),
                    index: Expr::var(&idx),
                }));
            }
            StmtKind::ArrayRead { target, array, index } => {
                let aux = self.fresh("aux");
                let idx = self.fresh("idx");
                out.push(assign(&aux, array.clone()));
                out.push(assign(&idx, index.clone()));
                out.push(Stmt {
                    id: stmt.id,
                    kind: StmtKind::ArrayRead {
                        target: target.clone(),
                        array: Expr::var(&aux),
                        index: Expr::var(&idx),
                    },
                });
                out.push(api(ApiStmt::ArrRead {
                    name: static_array_name(array),
                    array: Expr::var(&aux),
                    index: Expr::var(&idx),
                }));
            }
            StmtKind::Malloc { target, size } => {
                let arg = self.fresh("size");
                out.push(assign(&arg, size.clone()));
                out.push(api(ApiStmt::CallMalloc {
                    size: Expr::var(&arg),
                }));
                out.push(Stmt {
                    id: stmt.id,
                    kind: StmtKind::Malloc {
                        target: target.clone(),
                        size: Expr::var(&arg),
                    },
                });
            }
            // plain assignments and prints have no summary-relevant operation
            StmtKind::Assign { .. } | StmtKind::Print { .. } => out.push(stmt.clone()),
            StmtKind::Api(_) => out.push(stmt.clone()),
        }
    }
}

fn api(call: ApiStmt) -> Stmt {
    Stmt::new(StmtKind::Api(call))
}

fn assign(name: &str, value: Expr) -> Stmt {
    Stmt::new(StmtKind::Assign {
        name: name.to_string(),
        value,
    })
}

/// Static identifier reported for an array: `main:<name>` (the fragment
/// has a single implicit function).
fn static_array_name(array: &Expr) -> String {
    match array {
        Expr::Var(name) => format!("main:{name}"),
        other => format!("main:{}", crate::pretty::expr_text(other)),
    }
}

/// Instrument a guard expression: Boolean sub-expressions are wrapped
/// in COND carrying `(guard_id, site)` with sites numbered left to
/// right; a guard whose top operator is not Boolean is wrapped whole.
pub fn instrument_guard(guard: &Expr, guard_id: StmtId) -> Expr {
    let mut next_site = 0u32;
    let top_is_bool = matches!(guard, Expr::Binary { op, .. } if op.is_bool())
        || matches!(guard, Expr::Unary { op, .. } if op.is_bool());
    let inner = cond_wrap(guard, guard_id, &mut next_site);
    let wrapped = if top_is_bool {
        inner
    } else {
        let site = next_site;
        Expr::Cond {
            guard_id,
            index: site,
            inner: Box::new(inner),
        }
    };
    Expr::Guard {
        guard_id,
        inner: Box::new(wrapped),
    }
}

fn cond_wrap(expr: &Expr, guard_id: StmtId, next_site: &mut u32) -> Expr {
    match expr {
        Expr::Binary { op, left, right } if op.is_bool() => {
            let l = cond_wrap(left, guard_id, next_site);
            let li = *next_site;
            *next_site += 1;
            let r = cond_wrap(right, guard_id, next_site);
            let ri = *next_site;
            *next_site += 1;
            Expr::Binary {
                op: *op,
                left: Box::new(Expr::Cond {
                    guard_id,
                    index: li,
                    inner: Box::new(l),
                }),
                right: Box::new(Expr::Cond {
                    guard_id,
                    index: ri,
                    inner: Box::new(r),
                }),
            }
        }
        Expr::Binary { op, left, right } => Expr::Binary {
            op: *op,
            left: Box::new(cond_wrap(left, guard_id, next_site)),
            right: Box::new(cond_wrap(right, guard_id, next_site)),
        },
        Expr::Unary { op, operand } if op.is_bool() => {
            let inner = cond_wrap(operand, guard_id, next_site);
            let site = *next_site;
            *next_site += 1;
            Expr::Unary {
                op: *op,
                operand: Box::new(Expr::Cond {
                    guard_id,
                    index: site,
                    inner: Box::new(inner),
                }),
            }
        }
        Expr::Unary { op, operand } => Expr::Unary {
            op: *op,
            operand: Box::new(cond_wrap(operand, guard_id, next_site)),
        },
        Expr::Int(_) | Expr::Var(_) | Expr::PostIncDec { .. } => expr.clone(),
        Expr::Guard { .. } | Expr::Cond { .. } => expr.clone(),
    }
}
