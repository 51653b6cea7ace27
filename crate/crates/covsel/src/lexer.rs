//! Tokenizer for MiniC source text.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    KwIf,
    KwElse,
    KwWhile,
    KwPrint,
    KwInput,
    KwMalloc,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Assign,
    PlusPlus,
    MinusMinus,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Int(v) => format!("integer `{v}`"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            TokenKind::KwIf => "if",
            TokenKind::KwElse => "else",
            TokenKind::KwWhile => "while",
            TokenKind::KwPrint => "print",
            TokenKind::KwInput => "input",
            TokenKind::KwMalloc => "malloc",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Semi => ";",
            TokenKind::Comma => ",",
            TokenKind::Assign => "=",
            TokenKind::PlusPlus => "++",
            TokenKind::MinusMinus => "--",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::Percent => "%",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::Gt => ">",
            TokenKind::Ge => ">=",
            TokenKind::EqEq => "==",
            TokenKind::Ne => "!=",
            TokenKind::AndAnd => "&&",
            TokenKind::OrOr => "||",
            TokenKind::Bang => "!",
            TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::Eof => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("unexpected character `{ch}` at {pos}")]
    UnexpectedChar { ch: char, pos: Pos },
    #[error("integer literal too large at {pos}")]
    IntOverflow { pos: Pos },
    #[error("`&` must be `&&` at {pos}")]
    LoneAmp { pos: Pos },
    #[error("`|` must be `||` at {pos}")]
    LonePipe { pos: Pos },
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! pos {
        () => {
            Pos { line, col }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let start = pos!();
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '/' if i + 1 < chars.len() && chars[i + 1] == '/' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '0'..='9' => {
                let mut value: i64 = 0;
                let mut len = 0u32;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    let d = chars[i] as i64 - '0' as i64;
                    value = value
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(d))
                        .ok_or(LexError::IntOverflow { pos: start })?;
                    i += 1;
                    len += 1;
                }
                col += len;
                tokens.push(Token {
                    kind: TokenKind::Int(value),
                    pos: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let begin = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[begin..i].iter().collect();
                col += (i - begin) as u32;
                let kind = match word.as_str() {
                    "if" => TokenKind::KwIf,
                    "else" => TokenKind::KwElse,
                    "while" => TokenKind::KwWhile,
                    "print" => TokenKind::KwPrint,
                    "input" => TokenKind::KwInput,
                    "malloc" => TokenKind::KwMalloc,
                    _ => TokenKind::Ident(word),
                };
                tokens.push(Token { kind, pos: start });
            }
            _ => {
                let two = if i + 1 < chars.len() {
                    Some((chars[i], chars[i + 1]))
                } else {
                    None
                };
                let (kind, width) = match two {
                    Some(('+', '+')) => (TokenKind::PlusPlus, 2),
                    Some(('-', '-')) => (TokenKind::MinusMinus, 2),
                    Some(('<', '=')) => (TokenKind::Le, 2),
                    Some(('>', '=')) => (TokenKind::Ge, 2),
                    Some(('=', '=')) => (TokenKind::EqEq, 2),
                    Some(('!', '=')) => (TokenKind::Ne, 2),
                    Some(('&', '&')) => (TokenKind::AndAnd, 2),
                    Some(('|', '|')) => (TokenKind::OrOr, 2),
                    _ => {
                        let kind = match c {
                            '(' => TokenKind::LParen,
                            ')' => TokenKind::RParen,
                            '{' => TokenKind::LBrace,
                            '}' => TokenKind::RBrace,
                            '[' => TokenKind::LBracket,
                            ']' => TokenKind::RBracket,
                            ';' => TokenKind::Semi,
                            ',' => TokenKind::Comma,
                            '=' => TokenKind::Assign,
                            '+' => TokenKind::Plus,
                            '-' => TokenKind::Minus,
                            '*' => TokenKind::Star,
                            '/' => TokenKind::Slash,
                            '%' => TokenKind::Percent,
                            '<' => TokenKind::Lt,
                            '>' => TokenKind::Gt,
                            '!' => TokenKind::Bang,
                            '&' => return Err(LexError::LoneAmp { pos: start }),
                            '|' => return Err(LexError::LonePipe { pos: start }),
                            other => {
                                return Err(LexError::UnexpectedChar {
                                    ch: other,
                                    pos: start,
                                })
                            }
                        };
                        (kind, 1)
                    }
                };
                i += width;
                col += width as u32;
                tokens.push(Token { kind, pos: start });
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: pos!(),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn postfix_decrement_is_one_token() {
        assert_eq!(
            kinds("x--"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::MinusMinus,
                TokenKind::Eof
            ]
        );
        // spaced minuses stay separate
        assert_eq!(
            kinds("x - -1"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Minus,
                TokenKind::Minus,
                TokenKind::Int(1),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("x = 1; // set x\ny = 2;").unwrap();
        let y = toks.iter().find(|t| t.kind == TokenKind::Ident("y".into())).unwrap();
        assert_eq!(y.pos, Pos { line: 2, col: 1 });
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(matches!(
            tokenize("x = $;"),
            Err(LexError::UnexpectedChar { ch: '$', .. })
        ));
        assert!(tokenize("a & b").is_err());
    }

    #[test]
    fn int_overflow_reported() {
        assert!(matches!(
            tokenize("99999999999999999999"),
            Err(LexError::IntOverflow { .. })
        ));
    }
}
