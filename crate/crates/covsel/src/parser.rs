//! Recursive descent parser for MiniC.
//!
//! Grammar, roughly:
//!
//! ```text
//! program    := input_decl* stmt*
//! input_decl := "input" ident ";" | "input" ident "[" "]" ";"
//! stmt       := "if" "(" expr ")" block ("else" block)?
//!             | "while" "(" expr ")" block
//!             | "print" "(" expr ")" ";"
//!             | ident "[" expr "]" "=" expr ";"
//!             | ident "=" "malloc" "(" expr ")" ";"
//!             | ident "=" ident "[" expr "]" ";"
//!             | ident "=" expr ";"
//! block      := "{" stmt* "}"
//! ```
//!
//! Array lookups appear only as the full right-hand side of an
//! assignment; anywhere else a `[` is a syntax error. Coverage API
//! names and the `__ts_` temporary prefix are reserved.

use thiserror::Error;

use crate::ast::{
    assign_ids, BinOp, Block, Expr, IncDec, InputKind, Program, Stmt, StmtKind, UnOp, API_NAMES,
    TEMP_PREFIX,
};
use crate::lexer::{tokenize, LexError, Pos, Token, TokenKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Unexpected {
        expected: String,
        found: String,
        pos: Pos,
    },
    #[error("reserved API name `{name}` used as identifier at {pos}")]
    ReservedApiName { name: String, pos: Pos },
    #[error("identifier `{name}` at {pos} uses the reserved `__ts_` prefix")]
    ReservedTempPrefix { name: String, pos: Pos },
    #[error("duplicate input declaration `{name}` at {pos}")]
    DuplicateInput { name: String, pos: Pos },
    #[error("input declarations must precede statements: `input` at {pos}")]
    LateInput { pos: Pos },
}

pub type ParseResult<T> = Result<T, ParseError>;

/// Parse MiniC source into a [`Program`] with pre-order ids assigned.
pub fn parse(source: &str) -> ParseResult<Program> {
    parse_named(source, "<input>")
}

/// Same as [`parse`] but records a source name in the program.
pub fn parse_named(source: &str, source_name: &str) -> ParseResult<Program> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut program = parser.program(source_name)?;
    assign_ids(&mut program);
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek2(&self) -> &TokenKind {
        let i = (self.pos + 1).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> ParseResult<T> {
        let t = self.peek();
        Err(ParseError::Unexpected {
            expected: expected.to_string(),
            found: t.kind.describe(),
            pos: t.pos,
        })
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> ParseResult<Token> {
        if self.peek().kind == kind {
            Ok(self.advance())
        } else {
            self.unexpected(what)
        }
    }

    fn ident(&mut self, what: &str) -> ParseResult<String> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Ident(name) => {
                if API_NAMES.contains(&name.as_str()) {
                    return Err(ParseError::ReservedApiName { name, pos: t.pos });
                }
                if name.starts_with(TEMP_PREFIX) {
                    return Err(ParseError::ReservedTempPrefix { name, pos: t.pos });
                }
                self.advance();
                Ok(name)
            }
            _ => self.unexpected(what),
        }
    }

    fn program(&mut self, source_name: &str) -> ParseResult<Program> {
        let mut inputs: Vec<(String, InputKind)> = Vec::new();
        while self.peek().kind == TokenKind::KwInput {
            let pos = self.advance().pos;
            let name = self.ident("input name")?;
            let kind = if self.peek().kind == TokenKind::LBracket {
                self.advance();
                self.expect(TokenKind::RBracket, "`]`")?;
                InputKind::Array
            } else {
                InputKind::Scalar
            };
            if inputs.iter().any(|(n, _)| *n == name) {
                return Err(ParseError::DuplicateInput { name, pos });
            }
            self.expect(TokenKind::Semi, "`;`")?;
            inputs.push((name, kind));
        }
        let body = self.stmts_until(TokenKind::Eof)?;
        self.expect(TokenKind::Eof, "end of input")?;
        Ok(Program {
            source_name: source_name.to_string(),
            inputs,
            body,
        })
    }

    fn stmts_until(&mut self, terminator: TokenKind) -> ParseResult<Vec<Stmt>> {
        let mut stmts = Vec::new();
        while self.peek().kind != terminator {
            if self.peek().kind == TokenKind::Eof {
                return self.unexpected(&terminator.describe());
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn block(&mut self) -> ParseResult<Block> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let stmts = self.stmts_until(TokenKind::RBrace)?;
        self.expect(TokenKind::RBrace, "`}`")?;
        Ok(Block { id: 0, stmts })
    }

    fn stmt(&mut self) -> ParseResult<Stmt> {
        match &self.peek().kind {
            TokenKind::KwIf => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let guard = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let then_block = self.block()?;
                let else_block = if self.peek().kind == TokenKind::KwElse {
                    self.advance();
                    self.block()?
                } else {
                    Block::empty()
                };
                Ok(Stmt::new(StmtKind::If {
                    guard,
                    then_block,
                    else_block,
                }))
            }
            TokenKind::KwWhile => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let guard = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Stmt::new(StmtKind::While { guard, body }))
            }
            TokenKind::KwPrint => {
                self.advance();
                self.expect(TokenKind::LParen, "`(`")?;
                let value = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Stmt::new(StmtKind::Print { value }))
            }
            TokenKind::KwInput => Err(ParseError::LateInput {
                pos: self.peek().pos,
            }),
            TokenKind::Ident(_) => self.assign_like(),
            _ => self.unexpected("statement"),
        }
    }

    /// Statements that start with an identifier: plain assignment,
    /// array write, array read, or malloc.
    fn assign_like(&mut self) -> ParseResult<Stmt> {
        let name = self.ident("identifier")?;
        match self.peek().kind {
            TokenKind::LBracket => {
                self.advance();
                let index = self.expr()?;
                self.expect(TokenKind::RBracket, "`]`")?;
                self.expect(TokenKind::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Stmt::new(StmtKind::ArrayWrite {
                    array: name,
                    index,
                    value,
                }))
            }
            TokenKind::Assign => {
                self.advance();
                if self.peek().kind == TokenKind::KwMalloc {
                    self.advance();
                    self.expect(TokenKind::LParen, "`(`")?;
                    let size = self.expr()?;
                    self.expect(TokenKind::RParen, "`)`")?;
                    self.expect(TokenKind::Semi, "`;`")?;
                    return Ok(Stmt::new(StmtKind::Malloc { target: name, size }));
                }
                // `x = a[e];` — lookahead for ident `[`
                if matches!(self.peek().kind, TokenKind::Ident(_))
                    && *self.peek2() == TokenKind::LBracket
                {
                    let array = self.ident("array name")?;
                    self.advance(); // `[`
                    let index = self.expr()?;
                    self.expect(TokenKind::RBracket, "`]`")?;
                    self.expect(TokenKind::Semi, "`;`")?;
                    return Ok(Stmt::new(StmtKind::ArrayRead {
                        target: name,
                        array: Expr::Var(array),
                        index,
                    }));
                }
                let value = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                Ok(Stmt::new(StmtKind::Assign { name, value }))
            }
            _ => self.unexpected("`=` or `[`"),
        }
    }

    fn expr(&mut self) -> ParseResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> ParseResult<Expr> {
        let mut e = self.and_expr()?;
        while self.peek().kind == TokenKind::OrOr {
            self.advance();
            let rhs = self.and_expr()?;
            e = Expr::binary(BinOp::Or, e, rhs);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> ParseResult<Expr> {
        let mut e = self.equality()?;
        while self.peek().kind == TokenKind::AndAnd {
            self.advance();
            let rhs = self.equality()?;
            e = Expr::binary(BinOp::And, e, rhs);
        }
        Ok(e)
    }

    fn equality(&mut self) -> ParseResult<Expr> {
        let mut e = self.relational()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::EqEq => BinOp::Eq,
                TokenKind::Ne => BinOp::Ne,
                _ => break,
            };
            self.advance();
            let rhs = self.relational()?;
            e = Expr::binary(op, e, rhs);
        }
        Ok(e)
    }

    fn relational(&mut self) -> ParseResult<Expr> {
        let mut e = self.additive()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Lt => BinOp::Lt,
                TokenKind::Le => BinOp::Le,
                TokenKind::Gt => BinOp::Gt,
                TokenKind::Ge => BinOp::Ge,
                _ => break,
            };
            self.advance();
            let rhs = self.additive()?;
            e = Expr::binary(op, e, rhs);
        }
        Ok(e)
    }

    fn additive(&mut self) -> ParseResult<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.multiplicative()?;
            e = Expr::binary(op, e, rhs);
        }
        Ok(e)
    }

    fn multiplicative(&mut self) -> ParseResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                TokenKind::Percent => BinOp::Rem,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            e = Expr::binary(op, e, rhs);
        }
        Ok(e)
    }

    fn unary(&mut self) -> ParseResult<Expr> {
        match self.peek().kind {
            TokenKind::Minus => {
                self.advance();
                Ok(Expr::unary(UnOp::Neg, self.unary()?))
            }
            TokenKind::Bang => {
                self.advance();
                Ok(Expr::unary(UnOp::Not, self.unary()?))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> ParseResult<Expr> {
        let e = self.primary()?;
        match self.peek().kind {
            TokenKind::PlusPlus | TokenKind::MinusMinus => {
                let op = if self.peek().kind == TokenKind::PlusPlus {
                    IncDec::Inc
                } else {
                    IncDec::Dec
                };
                match e {
                    Expr::Var(name) => {
                        self.advance();
                        Ok(Expr::PostIncDec { name, op })
                    }
                    _ => self.unexpected("`;` (postfix ++/-- applies to variables only)"),
                }
            }
            _ => Ok(e),
        }
    }

    fn primary(&mut self) -> ParseResult<Expr> {
        match self.peek().kind.clone() {
            TokenKind::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            TokenKind::Ident(_) => Ok(Expr::Var(self.ident("expression")?)),
            TokenKind::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.unexpected("expression"),
        }
    }
}
