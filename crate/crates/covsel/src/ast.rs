//! Abstract syntax for MiniC, a small C-like language with integers,
//! heap-allocated integer arrays, `while`/`if` control flow, `print`,
//! postfix `++`/`--`, and an `input` declaration block that binds
//! test-input variables.
//!
//! Every statement and every conditional/loop branch block carries an
//! integer id. Ids are assigned by [`assign_ids`] in pre-order starting
//! at 1 and are unique within one program.

/// Statement / block identifier. 0 means "not assigned" and is reserved
/// for nodes injected by instrumentation.
pub type StmtId = u32;

/// Prefix reserved for temporaries introduced by instrumentation.
/// Identifiers with this prefix are rejected by the parser.
pub const TEMP_PREFIX: &str = "__ts_";

/// Names of the coverage API, reserved at parse time.
pub const API_NAMES: &[&str] = &[
    "BEGIN", "END", "BLOCK", "GUARD", "COND", "ARR_READ", "ARR_WRITE", "CALL_MALLOC",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

impl UnOp {
    /// The Boolean operators are exactly `!`, `&&`, `||`.
    pub fn is_bool(self) -> bool {
        matches!(self, UnOp::Not)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    /// The Boolean operators are exactly `!`, `&&`, `||`.
    pub fn is_bool(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncDec {
    Inc,
    Dec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Unary {
        op: UnOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// Postfix `x++` / `x--`: evaluates to the old value of `x`.
    PostIncDec {
        name: String,
        op: IncDec,
    },
    /// `GUARD(gid, e)` — logs the guard value. Instrumented programs only.
    Guard {
        guard_id: StmtId,
        inner: Box<Expr>,
    },
    /// `COND(gid, j, e)` — logs the value of the j-th Boolean
    /// sub-expression of guard `gid`. Instrumented programs only.
    Cond {
        guard_id: StmtId,
        index: u32,
        inner: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn unary(op: UnOp, operand: Expr) -> Expr {
        Expr::Unary {
            op,
            operand: Box::new(operand),
        }
    }

    /// True if the expression contains GUARD/COND wrappers.
    pub fn is_instrumented(&self) -> bool {
        match self {
            Expr::Int(_) | Expr::Var(_) | Expr::PostIncDec { .. } => false,
            Expr::Unary { operand, .. } => operand.is_instrumented(),
            Expr::Binary { left, right, .. } => left.is_instrumented() || right.is_instrumented(),
            Expr::Guard { .. } | Expr::Cond { .. } => true,
        }
    }
}

/// A conditional/loop branch block. Gets an id of its own so block
/// coverage can refer to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: StmtId,
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn empty() -> Block {
        Block { id: 0, stmts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { id: 0, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    If {
        guard: Expr,
        then_block: Block,
        else_block: Block,
    },
    While {
        guard: Expr,
        body: Block,
    },
    /// `x = e;`
    Assign { name: String, value: Expr },
    /// `x[e_index] = e_value;`
    ArrayWrite {
        array: String,
        index: Expr,
        value: Expr,
    },
    /// `x = e_array[e_index];` — array lookups appear only in this
    /// statement form, per the grammar.
    ArrayRead {
        target: String,
        array: Expr,
        index: Expr,
    },
    /// `x = malloc(e);`
    Malloc { target: String, size: Expr },
    /// `print(e);`
    Print { value: Expr },
    /// Coverage API call. Never produced by the parser.
    Api(ApiStmt),
}

/// Control-flow statement type reported by BEGIN/END.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfKind {
    If,
    While,
}

impl CfKind {
    pub fn label(self) -> &'static str {
        match self {
            CfKind::If => "IF",
            CfKind::While => "WHILE",
        }
    }
}

/// Statement-level coverage API calls injected by the instrumenter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiStmt {
    Begin { kind: CfKind, id: StmtId },
    End { kind: CfKind, id: StmtId },
    Block { id: StmtId },
    ArrRead { name: String, array: Expr, index: Expr },
    ArrWrite { name: String, array: Expr, index: Expr },
    CallMalloc { size: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Scalar,
    Array,
}

/// A parsed MiniC program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub source_name: String,
    /// Declared test-input variables, in declaration order.
    pub inputs: Vec<(String, InputKind)>,
    pub body: Vec<Stmt>,
}

impl Program {
    /// True if any statement or guard carries instrumentation.
    pub fn is_instrumented(&self) -> bool {
        fn stmt_instrumented(s: &Stmt) -> bool {
            match &s.kind {
                StmtKind::Api(_) => true,
                StmtKind::If {
                    guard,
                    then_block,
                    else_block,
                } => {
                    guard.is_instrumented()
                        || then_block.stmts.iter().any(stmt_instrumented)
                        || else_block.stmts.iter().any(stmt_instrumented)
                }
                StmtKind::While { guard, body } => {
                    guard.is_instrumented() || body.stmts.iter().any(stmt_instrumented)
                }
                StmtKind::Assign { value, .. } | StmtKind::Print { value } => {
                    value.is_instrumented()
                }
                StmtKind::ArrayWrite { index, value, .. } => {
                    index.is_instrumented() || value.is_instrumented()
                }
                StmtKind::ArrayRead { array, index, .. } => {
                    array.is_instrumented() || index.is_instrumented()
                }
                StmtKind::Malloc { size, .. } => size.is_instrumented(),
            }
        }
        self.body.iter().any(stmt_instrumented)
    }
}

/// Assign statement and branch-block ids by pre-order traversal,
/// starting at 1. Deterministic and idempotent; API nodes keep id 0.
pub fn assign_ids(program: &mut Program) {
    let mut next = 1;
    for stmt in &mut program.body {
        assign_stmt(stmt, &mut next);
    }
}

fn assign_stmt(stmt: &mut Stmt, next: &mut StmtId) {
    if matches!(stmt.kind, StmtKind::Api(_)) {
        return;
    }
    stmt.id = *next;
    *next += 1;
    match &mut stmt.kind {
        StmtKind::If {
            then_block,
            else_block,
            ..
        } => {
            assign_block(then_block, next);
            assign_block(else_block, next);
        }
        StmtKind::While { body, .. } => assign_block(body, next),
        _ => {}
    }
}

fn assign_block(block: &mut Block, next: &mut StmtId) {
    block.id = *next;
    *next += 1;
    for stmt in &mut block.stmts {
        assign_stmt(stmt, next);
    }
}

/// Collect all assigned ids (statements and blocks) in pre-order.
pub fn collect_ids(program: &Program) -> Vec<StmtId> {
    fn walk_stmt(s: &Stmt, out: &mut Vec<StmtId>) {
        if matches!(s.kind, StmtKind::Api(_)) {
            return;
        }
        out.push(s.id);
        match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                walk_block(then_block, out);
                walk_block(else_block, out);
            }
            StmtKind::While { body, .. } => walk_block(body, out),
            _ => {}
        }
    }
    fn walk_block(b: &Block, out: &mut Vec<StmtId>) {
        out.push(b.id);
        for s in &b.stmts {
            walk_stmt(s, out);
        }
    }
    let mut out = Vec::new();
    for s in &program.body {
        walk_stmt(s, &mut out);
    }
    out
}
