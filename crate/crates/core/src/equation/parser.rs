//! Recursive-descent parser for the equation-set grammar.
//!
//! Grammar (left-associative, `{*, /}` over `{+, -}`, unary minus binds
//! tighter than any binary operator):
//!
//! ```text
//! set      := sep* equation (sep+ equation)* sep*
//! equation := expr '=' expr
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | atom
//! atom     := number | slot | unknown | '(' expr ')'
//! ```

use super::lexer::{lex, Token, TokenKind};
use super::{BinaryOp, Equation, EquationSet, Expr, ParseError};

pub fn parse_equation_set(text: &str) -> Result<EquationSet, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.chars().count() };
    parser.parse_set()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Char length of the source, for end-of-input error positions.
    end: usize,
}

const ATOM_EXPECTED: &[&str] = &["number", "slot", "unknown", "(", "-"];

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn error_here(&self, expected: &[&str]) -> ParseError {
        match self.peek() {
            Some(tok) => ParseError::Syntax {
                pos: tok.pos,
                found: tok.surface.clone(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
            },
            None => ParseError::Syntax {
                pos: self.end,
                found: "end of input".into(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Separator)) {
            self.pos += 1;
        }
    }

    fn parse_set(&mut self) -> Result<EquationSet, ParseError> {
        self.skip_separators();
        if self.peek().is_none() {
            return Err(ParseError::EmptyInput);
        }
        let mut equations = Vec::new();
        loop {
            equations.push(self.parse_equation()?);
            match self.peek().map(|t| &t.kind) {
                None => break,
                Some(TokenKind::Separator) => {
                    self.skip_separators();
                    if self.peek().is_none() {
                        break;
                    }
                }
                Some(_) => return Err(self.error_here(&["; or newline", "end of input"])),
            }
        }
        Ok(EquationSet { equations })
    }

    fn parse_equation(&mut self) -> Result<Equation, ParseError> {
        let lhs = self.parse_expr()?;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Equals) => {
                self.advance();
            }
            _ => return Err(self.error_here(&["="])),
        }
        let rhs = self.parse_expr()?;
        Ok(Equation { lhs, rhs })
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.advance();
            let inner = self.parse_factor()?;
            return Ok(Expr::negate(inner));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let kind = match self.peek() {
            Some(tok) => tok.kind.clone(),
            None => return Err(self.error_here(ATOM_EXPECTED)),
        };
        match kind {
            TokenKind::Number(v) => {
                self.advance();
                Ok(Expr::Literal(v))
            }
            TokenKind::Slot(s) => {
                self.advance();
                Ok(Expr::Slot(s))
            }
            TokenKind::Unknown(u) => {
                self.advance();
                Ok(Expr::Unknown(u))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.parse_expr()?;
                match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::RParen) => {
                        self.advance();
                        Ok(inner)
                    }
                    _ => Err(self.error_here(&[")"])),
                }
            }
            _ => Err(self.error_here(ATOM_EXPECTED)),
        }
    }
}
