//! The equation-template language: parsing, canonicalization, abstraction,
//! instantiation, and exact linear solving.
//!
//! An equation set is one or more infix equations over numbers, slots
//! (`A`, `B`, ... placeholders bound to numbers from a problem text) and
//! unknowns (`x`, `y`, `z`). Abstracting the numbers of a concrete equation
//! set away into slots yields an [`EquationTemplate`]; templates are equal
//! iff their canonical strings are equal.

mod lexer;
mod linear;
mod parser;

pub use lexer::{lex, Token, TokenKind};
pub use linear::{solve_linear_system, to_linear_forms, LinearForm, LinearizeError, SolveError};
pub use parser::parse_equation_set;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::{format_decimal, is_terminating_decimal, Rational};
use num_traits::Signed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: found '{found}', expected one of {expected:?}")]
    Syntax { pos: usize, found: String, expected: Vec<String> },
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template has no equations")]
    NoEquations,
    #[error("template references no unknowns")]
    NoUnknowns,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no value provided for slot {0}")]
pub struct MissingSlotValue(pub SlotId);

/// Ordered slot identifier: `A`..`Z`, then `A1`, `B1`, ... deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotId(pub u32);

impl SlotId {
    pub fn parse(s: &str) -> Option<Self> {
        let mut chars = s.chars();
        let first = chars.next()?;
        if !first.is_ascii_uppercase() {
            return None;
        }
        let rest = chars.as_str();
        let gen: u32 = if rest.is_empty() {
            0
        } else {
            if !rest.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            rest.parse().ok()?
        };
        Some(SlotId(gen * 26 + (first as u32 - 'A' as u32)))
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = (b'A' + (self.0 % 26) as u8) as char;
        let gen = self.0 / 26;
        if gen == 0 {
            write!(f, "{letter}")
        } else {
            write!(f, "{letter}{gen}")
        }
    }
}

/// Unknowns are drawn from a fixed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnknownId {
    X,
    Y,
    Z,
}

impl UnknownId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x" => Some(UnknownId::X),
            "y" => Some(UnknownId::Y),
            "z" => Some(UnknownId::Z),
            _ => None,
        }
    }

    pub const ALL: [UnknownId; 3] = [UnknownId::X, UnknownId::Y, UnknownId::Z];
}

impl fmt::Display for UnknownId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownId::X => "x",
            UnknownId::Y => "y",
            UnknownId::Z => "z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

/// Expression tree. Literal nodes are always non-negative with a terminating
/// decimal value; `Expr::literal` normalizes anything else, so every literal
/// renders as a single exact decimal token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Rational),
    Slot(SlotId),
    Unknown(UnknownId),
    Negate(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Normalizing literal constructor: negative values become a negation,
    /// non-terminating rationals become an explicit integer division.
    pub fn literal(value: Rational) -> Expr {
        if value.is_negative() {
            return Expr::Negate(Box::new(Expr::literal(-value)));
        }
        if !is_terminating_decimal(&value) {
            let num = Rational::from_integer(value.numer().clone());
            let den = Rational::from_integer(value.denom().clone());
            return Expr::Binary(
                BinaryOp::Div,
                Box::new(Expr::literal(num)),
                Box::new(Expr::literal(den)),
            );
        }
        Expr::Literal(value)
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(inner: Expr) -> Expr {
        Expr::Negate(Box::new(inner))
    }

    fn write_canonical(&self, out: &mut String, as_operand: bool) {
        match self {
            Expr::Literal(v) => out.push_str(&format_decimal(v)),
            Expr::Slot(s) => out.push_str(&s.to_string()),
            Expr::Unknown(u) => out.push_str(&u.to_string()),
            Expr::Negate(inner) => {
                if as_operand {
                    out.push_str("( ");
                }
                out.push_str("- ");
                inner.write_canonical(out, true);
                if as_operand {
                    out.push_str(" )");
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                if as_operand {
                    out.push_str("( ");
                }
                lhs.write_canonical(out, true);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                rhs.write_canonical(out, true);
                if as_operand {
                    out.push_str(" )");
                }
            }
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Negate(inner) => inner.visit(f),
            Expr::Binary(_, lhs, rhs) => {
                lhs.visit(f);
                rhs.visit(f);
            }
            _ => {}
        }
    }

    fn map(&self, f: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(replaced) = f(self) {
            return replaced;
        }
        match self {
            Expr::Negate(inner) => Expr::Negate(Box::new(inner.map(f))),
            Expr::Binary(op, lhs, rhs) => {
                Expr::Binary(*op, Box::new(lhs.map(f)), Box::new(rhs.map(f)))
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub lhs: Expr,
    pub rhs: Expr,
}

/// A parsed equation set: concrete literals and unknowns, possibly slots
/// when parsed from a canonical template string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationSet {
    pub equations: Vec<Equation>,
}

impl EquationSet {
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for (i, eq) in self.equations.iter().enumerate() {
            if i > 0 {
                out.push_str(" ; ");
            }
            eq.lhs.write_canonical(&mut out, false);
            out.push_str(" = ");
            eq.rhs.write_canonical(&mut out, false);
        }
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        for eq in &self.equations {
            eq.lhs.visit(f);
            eq.rhs.visit(f);
        }
    }

    /// Distinct slot ids referenced, in slot order.
    pub fn slots(&self) -> Vec<SlotId> {
        let mut set = std::collections::BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Slot(s) = e {
                set.insert(*s);
            }
        });
        set.into_iter().collect()
    }

    /// Distinct unknowns referenced, in vocabulary order.
    pub fn unknowns(&self) -> Vec<UnknownId> {
        let mut set = std::collections::BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Unknown(u) = e {
                set.insert(*u);
            }
        });
        set.into_iter().collect()
    }

    /// Distinct literal values, in first-appearance order (left-to-right,
    /// equation order).
    pub fn literal_values(&self) -> Vec<Rational> {
        let mut seen = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Literal(v) = e {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        });
        seen
    }
}

/// Ordered mapping from mention values to slot ids, built by the text
/// pipeline. Order is first-appearance order in the problem text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotAssignment {
    entries: Vec<(Rational, SlotId)>,
}

impl SlotAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(entries: Vec<(Rational, SlotId)>) -> Self {
        Self { entries }
    }

    /// Append the next (value, slot) pair; duplicate values keep the earlier slot.
    pub fn push(&mut self, value: Rational, slot: SlotId) {
        if self.lookup(&value).is_none() {
            self.entries.push((value, slot));
        }
    }

    pub fn lookup(&self, value: &Rational) -> Option<SlotId> {
        self.entries.iter().find(|(v, _)| v == value).map(|(_, s)| *s)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Rational, SlotId)> {
        self.entries.iter()
    }

    /// The inverse view: slot -> value, as needed by `instantiate`.
    pub fn values(&self) -> BTreeMap<SlotId, Rational> {
        self.entries.iter().map(|(v, s)| (*s, v.clone())).collect()
    }
}

/// An equation set with numbers abstracted into ordered slots. The canonical
/// string is the identity of the template: class label, serialization form,
/// and equality witness.
#[derive(Debug, Clone)]
pub struct EquationTemplate {
    equations: Vec<Equation>,
    slots: Vec<SlotId>,
    unknowns: Vec<UnknownId>,
    canonical: String,
}

impl EquationTemplate {
    pub fn new(equations: Vec<Equation>) -> Result<Self, TemplateError> {
        if equations.is_empty() {
            return Err(TemplateError::NoEquations);
        }
        let set = EquationSet { equations };
        let unknowns = set.unknowns();
        if unknowns.is_empty() {
            return Err(TemplateError::NoUnknowns);
        }
        let slots = set.slots();
        let canonical = set.canonical_string();
        Ok(Self { equations: set.equations, slots, unknowns, canonical })
    }

    /// Parse a canonical (or canonicalizable) template string.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let set = parse_equation_set(text)?;
        Self::new(set.equations)
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn slots(&self) -> &[SlotId] {
        &self.slots
    }

    pub fn unknowns(&self) -> &[UnknownId] {
        &self.unknowns
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    /// Substitute a value for every slot, producing a concrete equation set.
    pub fn instantiate(
        &self,
        values: &BTreeMap<SlotId, Rational>,
    ) -> Result<EquationSet, MissingSlotValue> {
        for slot in &self.slots {
            if !values.contains_key(slot) {
                return Err(MissingSlotValue(*slot));
            }
        }
        let equations = self
            .equations
            .iter()
            .map(|eq| Equation {
                lhs: eq.lhs.map(&|e| match e {
                    Expr::Slot(s) => Some(Expr::literal(values[s].clone())),
                    _ => None,
                }),
                rhs: eq.rhs.map(&|e| match e {
                    Expr::Slot(s) => Some(Expr::literal(values[s].clone())),
                    _ => None,
                }),
            })
            .collect();
        Ok(EquationSet { equations })
    }
}

impl PartialEq for EquationTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for EquationTemplate {}

impl std::hash::Hash for EquationTemplate {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl fmt::Display for EquationTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

/// Replace every literal whose value has an assigned slot with that slot.
/// Unmatched literals are retained as constants.
pub fn abstract_equations(
    set: &EquationSet,
    assignment: &SlotAssignment,
) -> Result<EquationTemplate, TemplateError> {
    let replace = |e: &Expr| -> Option<Expr> {
        if let Expr::Literal(v) = e {
            assignment.lookup(v).map(Expr::Slot)
        } else {
            None
        }
    };
    let equations = set
        .equations
        .iter()
        .map(|eq| Equation { lhs: eq.lhs.map(&replace), rhs: eq.rhs.map(&replace) })
        .collect();
    EquationTemplate::new(equations)
}

#[cfg(test)]
mod tests;
