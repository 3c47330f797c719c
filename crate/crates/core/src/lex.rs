//! Tokenizer shared by the surface parser and the core-term reader.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Pipe,
    LArrow,
    RArrow,
    EqEq,
    AndAnd,
    OrOr,
    Lambda,
    Caret,
    Bottom,
    Oplus,
    Colon,
    ColonColon,
    At,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(i) => write!(f, "integer {i}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Eof => f.write_str("end of input"),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrack => "[",
                    Tok::RBrack => "]",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Comma => ",",
                    Tok::Dot => ".",
                    Tok::Pipe => "|",
                    Tok::LArrow => "<-",
                    Tok::RArrow => "->",
                    Tok::EqEq => "==",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    Tok::Lambda => "λ",
                    Tok::Caret => "^",
                    Tok::Bottom => "⊥",
                    Tok::Oplus => "⊕",
                    Tok::Colon => ":",
                    Tok::ColonColon => "::",
                    Tok::At => "@",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

pub fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |pos: Pos, message: String| SyntaxError { pos, message };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let peek = chars.get(i + 1).copied();
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && peek == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two = |a: char, b: char| c == a && peek == Some(b);
        let tok = if two('<', '-') {
            advance(2, &mut i, &mut col);
            Tok::LArrow
        } else if two('-', '>') {
            advance(2, &mut i, &mut col);
            Tok::RArrow
        } else if two('=', '=') {
            advance(2, &mut i, &mut col);
            Tok::EqEq
        } else if two('&', '&') {
            advance(2, &mut i, &mut col);
            Tok::AndAnd
        } else if two('|', '|') {
            advance(2, &mut i, &mut col);
            Tok::OrOr
        } else if two(':', ':') {
            advance(2, &mut i, &mut col);
            Tok::ColonColon
        } else if c.is_ascii_digit() || (c == '-' && peek.is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            advance(1, &mut i, &mut col);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Int(text.parse().map_err(|_| err(pos, format!("integer literal {text} out of range")))?)
        } else if (c.is_alphabetic() && c != 'λ') || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance(1, &mut i, &mut col);
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c == '"' {
            advance(1, &mut i, &mut col);
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(pos, "unterminated string literal".into()));
                };
                match ch {
                    '"' => {
                        advance(1, &mut i, &mut col);
                        break;
                    }
                    '\n' => return Err(err(pos, "newline in string literal".into())),
                    '\\' => {
                        let esc = chars.get(i + 1).copied();
                        advance(2, &mut i, &mut col);
                        match esc {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('\'') => s.push('\''),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('r') => s.push('\r'),
                            Some('0') => s.push('\0'),
                            Some('u') if chars.get(i) == Some(&'{') => {
                                let start = i + 1;
                                let end = (start..chars.len())
                                    .find(|&j| chars[j] == '}')
                                    .ok_or_else(|| err(pos, "unterminated unicode escape".into()))?;
                                let hex: String = chars[start..end].iter().collect();
                                let ch = u32::from_str_radix(&hex, 16)
                                    .ok()
                                    .and_then(char::from_u32)
                                    .ok_or_else(|| err(pos, format!("bad unicode escape {hex}")))?;
                                s.push(ch);
                                advance(end + 1 - i, &mut i, &mut col);
                            }
                            other => return Err(err(pos, format!("unknown escape {other:?}"))),
                        }
                    }
                    other => {
                        s.push(other);
                        advance(1, &mut i, &mut col);
                    }
                }
            }
            Tok::Str(s)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '|' => Tok::Pipe,
                'λ' | '\\' => Tok::Lambda,
                '^' => Tok::Caret,
                '⊥' => Tok::Bottom,
                '⊕' => Tok::Oplus,
                ':' => Tok::Colon,
                '@' => Tok::At,
                other => return Err(err(pos, format!("unexpected character {other:?}"))),
            };
            advance(1, &mut i, &mut col);
            t
        };
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// Cursor over a token stream.
pub struct Tokens {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Tokens {
    pub fn new(src: &str) -> Result<Tokens, SyntaxError> {
        Ok(Tokens { toks: tokenize(src)?, at: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn error<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { pos: self.pos(), message: message.into() })
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), SyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.error(format!("expected {t}, found {}", self.peek()))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {other}")),
        }
    }
}
