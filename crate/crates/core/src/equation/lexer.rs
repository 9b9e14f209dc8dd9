//! Tokenizer for the equation-set language.

use crate::rational::{parse_decimal, Rational};

use super::{ParseError, SlotId, UnknownId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Number(Rational),
    Slot(SlotId),
    Unknown(UnknownId),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Equals,
    Separator,
}

/// One lexed token. `surface` is the exact source slice, so re-lexing the
/// surface of any token yields an identical token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub surface: String,
    /// Char offset into the source text.
    pub pos: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i;
        match c {
            '\n' | ';' => {
                tokens.push(Token { kind: TokenKind::Separator, surface: c.to_string(), pos });
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '+' => {
                tokens.push(Token { kind: TokenKind::Plus, surface: "+".into(), pos });
                i += 1;
            }
            '-' => {
                tokens.push(Token { kind: TokenKind::Minus, surface: "-".into(), pos });
                i += 1;
            }
            '*' => {
                tokens.push(Token { kind: TokenKind::Star, surface: "*".into(), pos });
                i += 1;
            }
            '/' => {
                tokens.push(Token { kind: TokenKind::Slash, surface: "/".into(), pos });
                i += 1;
            }
            '(' => {
                tokens.push(Token { kind: TokenKind::LParen, surface: "(".into(), pos });
                i += 1;
            }
            ')' => {
                tokens.push(Token { kind: TokenKind::RParen, surface: ")".into(), pos });
                i += 1;
            }
            '=' => {
                tokens.push(Token { kind: TokenKind::Equals, surface: "=".into(), pos });
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '.' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let surface: String = chars[i..j].iter().collect();
                let value = parse_decimal(&surface).ok_or_else(|| ParseError::Syntax {
                    pos,
                    found: surface.clone(),
                    expected: vec!["number".into()],
                })?;
                tokens.push(Token { kind: TokenKind::Number(value), surface, pos });
                i = j;
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_alphanumeric() {
                    j += 1;
                }
                let surface: String = chars[i..j].iter().collect();
                let kind = if let Some(u) = UnknownId::parse(&surface) {
                    TokenKind::Unknown(u)
                } else if let Some(s) = SlotId::parse(&surface) {
                    TokenKind::Slot(s)
                } else {
                    return Err(ParseError::Syntax {
                        pos,
                        found: surface,
                        expected: vec!["slot (A, B, ...)".into(), "unknown (x, y, z)".into()],
                    });
                };
                tokens.push(Token { kind, surface, pos });
                i = j;
            }
            other => {
                return Err(ParseError::Syntax {
                    pos,
                    found: other.to_string(),
                    expected: vec!["number".into(), "identifier".into(), "operator".into()],
                });
            }
        }
    }
    Ok(tokens)
}
