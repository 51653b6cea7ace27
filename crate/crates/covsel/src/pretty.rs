//! Canonical pretty-printer for MiniC programs, instrumented or not.
//! `parse(pretty(p))` reproduces `p` structurally for uninstrumented
//! programs.

use std::fmt::Write;

use crate::ast::{ApiStmt, Block, Expr, IncDec, InputKind, Program, Stmt, StmtKind, UnOp};
use crate::instrument::InstrumentedProgram;

const INDENT: &str = "    ";

/// Render a program in canonical concrete syntax. The empty program
/// renders as the empty string.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for (name, kind) in &program.inputs {
        match kind {
            InputKind::Scalar => writeln!(out, "input {name};").unwrap(),
            InputKind::Array => writeln!(out, "input {name}[];").unwrap(),
        }
    }
    write_stmts(&mut out, &program.body, 0);
    out
}

/// Render an instrumented program.
pub fn pretty_instrumented(program: &InstrumentedProgram) -> String {
    let mut out = String::new();
    for (name, kind) in &program.origin.inputs {
        match kind {
            InputKind::Scalar => writeln!(out, "input {name};").unwrap(),
            InputKind::Array => writeln!(out, "input {name}[];").unwrap(),
        }
    }
    write_stmts(&mut out, &program.body, 0);
    out
}

fn write_stmts(out: &mut String, stmts: &[Stmt], depth: usize) {
    for stmt in stmts {
        write_stmt(out, stmt, depth);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn write_block(out: &mut String, block: &Block, depth: usize) {
    out.push_str("{\n");
    write_stmts(out, &block.stmts, depth + 1);
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match &stmt.kind {
        StmtKind::If {
            guard,
            then_block,
            else_block,
        } => {
            write!(out, "if ({}) ", expr_text(guard)).unwrap();
            write_block(out, then_block, depth);
            if !else_block.stmts.is_empty() {
                out.push_str(" else ");
                write_block(out, else_block, depth);
            }
            out.push('\n');
        }
        StmtKind::While { guard, body } => {
            write!(out, "while ({}) ", expr_text(guard)).unwrap();
            write_block(out, body, depth);
            out.push('\n');
        }
        StmtKind::Assign { name, value } => {
            writeln!(out, "{name} = {};", expr_text(value)).unwrap();
        }
        StmtKind::ArrayWrite { array, index, value } => {
            writeln!(out, "{array}[{}] = {};", expr_text(index), expr_text(value)).unwrap();
        }
        StmtKind::ArrayRead { target, array, index } => {
            writeln!(out, "{target} = {}[{}];", expr_text(array), expr_text(index)).unwrap();
        }
        StmtKind::Malloc { target, size } => {
            writeln!(out, "{target} = malloc({});", expr_text(size)).unwrap();
        }
        StmtKind::Print { value } => {
            writeln!(out, "print({});", expr_text(value)).unwrap();
        }
        StmtKind::Api(api) => {
            match api {
                ApiStmt::Begin { kind, id } => {
                    writeln!(out, "BEGIN(\"{}\", {id});", kind.label()).unwrap()
                }
                ApiStmt::End { kind, id } => {
                    writeln!(out, "END(\"{}\", {id});", kind.label()).unwrap()
                }
                ApiStmt::Block { id } => writeln!(out, "BLOCK({id});").unwrap(),
                ApiStmt::ArrRead { name, array, index } => writeln!(
                    out,
                    "ARR_READ(\"{name}\", {}, {});",
                    expr_text(array),
                    expr_text(index)
                )
                .unwrap(),
                ApiStmt::ArrWrite { name, array, index } => writeln!(
                    out,
                    "ARR_WRITE(\"{name}\", {}, {});",
                    expr_text(array),
                    expr_text(index)
                )
                .unwrap(),
                ApiStmt::CallMalloc { size } => {
                    writeln!(out, "CALL_MALLOC({});", expr_text(size)).unwrap()
                }
            };
        }
    }
}

/// Render an expression with minimal parentheses.
pub fn expr_text(expr: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, expr, 0);
    s
}

// Binding strength; higher binds tighter. Primaries are 100.
fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Int(_) | Expr::Var(_) | Expr::PostIncDec { .. } | Expr::Guard { .. } | Expr::Cond { .. } => 100,
        Expr::Unary { .. } => 90,
        Expr::Binary { op, .. } => match op {
            crate::ast::BinOp::Mul | crate::ast::BinOp::Div | crate::ast::BinOp::Rem => 80,
            crate::ast::BinOp::Add | crate::ast::BinOp::Sub => 70,
            crate::ast::BinOp::Lt
            | crate::ast::BinOp::Le
            | crate::ast::BinOp::Gt
            | crate::ast::BinOp::Ge => 60,
            crate::ast::BinOp::Eq | crate::ast::BinOp::Ne => 50,
            crate::ast::BinOp::And => 40,
            crate::ast::BinOp::Or => 30,
        },
    }
}

fn write_expr(out: &mut String, expr: &Expr, min_prec: u8) {
    let prec = precedence(expr);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match expr {
        Expr::Int(v) => write!(out, "{v}").unwrap(),
        Expr::Var(name) => out.push_str(name),
        Expr::PostIncDec { name, op } => {
            out.push_str(name);
            out.push_str(match op {
                IncDec::Inc => "++",
                IncDec::Dec => "--",
            });
        }
        Expr::Unary { op, operand } => {
            out.push_str(op.symbol());
            // `- -x` would re-lex as `--`; parenthesize nested sign flips
            let force = matches!(
                (op, operand.as_ref()),
                (UnOp::Neg, Expr::Unary { op: UnOp::Neg, .. })
            );
            if force {
                out.push('(');
                write_expr(out, operand, 0);
                out.push(')');
            } else {
                write_expr(out, operand, 90);
            }
        }
        Expr::Binary { op, left, right } => {
            // left-associative: the right child needs strictly higher binding
            write_expr(out, left, prec);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, right, prec + 1);
        }
        Expr::Guard { guard_id, inner } => {
            write!(out, "GUARD({guard_id}, ").unwrap();
            write_expr(out, inner, 0);
            out.push(')');
        }
        Expr::Cond { guard_id, index, inner } => {
            write!(out, "COND({guard_id}, {index}, ").unwrap();
            write_expr(out, inner, 0);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::BinOp;
    use crate::parser::parse;

    #[test]
    fn empty_program_prints_empty() {
        assert_eq!(pretty(&parse("").unwrap()), "");
    }

    #[test]
    fn minimal_parens() {
        let p = parse("x = (a + b) * c - d / e;").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { value, .. } => {
                assert_eq!(expr_text(value), "(a + b) * c - d / e");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn left_associativity_preserved() {
        // a - (b - c) must keep its parens, (a - b) - c must not
        let p = parse("x = a - (b - c);").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { value, .. } => assert_eq!(expr_text(value), "a - (b - c)"),
            _ => unreachable!(),
        }
        let p = parse("x = a - b - c;").unwrap();
        match &p.body[0].kind {
            StmtKind::Assign { value, .. } => assert_eq!(expr_text(value), "a - b - c"),
            _ => unreachable!(),
        }
    }

    #[test]
    fn double_negation_survives_relex() {
        let e = Expr::unary(UnOp::Neg, Expr::unary(UnOp::Neg, Expr::var("x")));
        assert_eq!(expr_text(&e), "-(-x)");
        let src = format!("y = {};", expr_text(&e));
        assert!(parse(&src).is_ok());
    }

    #[test]
    fn round_trip_fixture() {
        let src = "input x;\ninput a[];\nwhile (x-- > 0) {\n    aux = a[0];\n    a[0] = aux + x;\n}\n";
        let p1 = parse(src).unwrap();
        let text = pretty(&p1);
        let p2 = parse(&text).unwrap();
        assert_eq!(p1, p2);
        // canonical output is a fixed point
        assert_eq!(text, pretty(&p2));
    }

    #[test]
    fn bool_guard_round_trip() {
        let src = "if (a > 0 && (b < 1 || !c)) {\n    x = 1;\n}\n";
        let p1 = parse(src).unwrap();
        let p2 = parse(&pretty(&p1)).unwrap();
        assert_eq!(p1, p2);
        match &p1.body[0].kind {
            StmtKind::If { guard, .. } => {
                assert!(matches!(guard, Expr::Binary { op: BinOp::And, .. }));
                assert_eq!(expr_text(guard), "a > 0 && (b < 1 || !c)");
            }
            _ => unreachable!(),
        }
    }
}
