//! Reduction of concrete equation sets to linear forms and exact solving.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::rational::Rational;

use super::{BinaryOp, EquationSet, Expr, SlotId, UnknownId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinearizeError {
    #[error("nonlinear term: unknowns on both sides of '{0}'")]
    NonlinearTerm(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unresolved slot {0}: instantiate the template before solving")]
    UnresolvedSlot(SlotId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("underdetermined system")]
    Underdetermined,
    #[error("inconsistent system")]
    Inconsistent,
}

/// An affine expression: `constant + sum(coefficients[u] * u)`.
/// Zero coefficients are never stored, so `coefficients.is_empty()`
/// means the form is a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    pub constant: Rational,
    pub coefficients: BTreeMap<UnknownId, Rational>,
}

impl LinearForm {
    pub fn constant(value: Rational) -> Self {
        Self { constant: value, coefficients: BTreeMap::new() }
    }

    pub fn unknown(u: UnknownId) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(u, Rational::from_integer(1.into()));
        Self { constant: Rational::zero(), coefficients }
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficient(&self, u: UnknownId) -> Rational {
        self.coefficients.get(&u).cloned().unwrap_or_else(Rational::zero)
    }

    fn insert_coeff(&mut self, u: UnknownId, value: Rational) {
        if value.is_zero() {
            self.coefficients.remove(&u);
        } else {
            self.coefficients.insert(u, value);
        }
    }

    pub fn add(&self, other: &LinearForm) -> LinearForm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (u, c) in &other.coefficients {
            let sum = out.coefficient(*u) + c;
            out.insert_coeff(*u, sum);
        }
        out
    }

    pub fn neg(&self) -> LinearForm {
        LinearForm {
            constant: -self.constant.clone(),
            coefficients: self.coefficients.iter().map(|(u, c)| (*u, -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &LinearForm) -> LinearForm {
        self.add(&other.neg())
    }

    pub fn scale(&self, factor: &Rational) -> LinearForm {
        if factor.is_zero() {
            return LinearForm::constant(Rational::zero());
        }
        LinearForm {
            constant: &self.constant * factor,
            coefficients: self.coefficients.iter().map(|(u, c)| (*u, c * factor)).collect(),
        }
    }

    pub fn mul(&self, other: &LinearForm) -> Result<LinearForm, LinearizeError> {
        if other.is_constant() {
            Ok(self.scale(&other.constant))
        } else if self.is_constant() {
            Ok(other.scale(&self.constant))
        } else {
            Err(LinearizeError::NonlinearTerm("*"))
        }
    }

    pub fn div(&self, other: &LinearForm) -> Result<LinearForm, LinearizeError> {
        if !other.is_constant() {
            return Err(LinearizeError::NonlinearTerm("/"));
        }
        if other.constant.is_zero() {
            return Err(LinearizeError::DivisionByZero);
        }
        Ok(self.scale(&other.constant.recip()))
    }

    /// Evaluate the form at an assignment. Unassigned unknowns are an error
    /// only if they carry a nonzero coefficient.
    pub fn eval(&self, assignment: &BTreeMap<UnknownId, Rational>) -> Option<Rational> {
        let mut total = self.constant.clone();
        for (u, c) in &self.coefficients {
            total += c * assignment.get(u)?;
        }
        Some(total)
    }
}

fn expr_to_form(expr: &Expr) -> Result<LinearForm, LinearizeError> {
    match expr {
        Expr::Literal(v) => Ok(LinearForm::constant(v.clone())),
        Expr::Slot(s) => Err(LinearizeError::UnresolvedSlot(*s)),
        Expr::Unknown(u) => Ok(LinearForm::unknown(*u)),
        Expr::Negate(inner) => Ok(expr_to_form(inner)?.neg()),
        Expr::Binary(op, lhs, rhs) => {
            let l = expr_to_form(lhs)?;
            let r = expr_to_form(rhs)?;
            match op {
                BinaryOp::Add => Ok(l.add(&r)),
                BinaryOp::Sub => Ok(l.sub(&r)),
                BinaryOp::Mul => l.mul(&r),
                BinaryOp::Div => l.div(&r),
            }
        }
    }
}

/// Turn each equation `lhs = rhs` into the single form `lhs - rhs` (equal to
/// zero), with exact rational arithmetic throughout.
pub fn to_linear_forms(set: &EquationSet) -> Result<Vec<LinearForm>, LinearizeError> {
    set.equations
        .iter()
        .map(|eq| Ok(expr_to_form(&eq.lhs)?.sub(&expr_to_form(&eq.rhs)?)))
        .collect()
}

/// Exact Gaussian elimination with partial pivoting over the rationals.
///
/// Returns a value for every unknown that appears with a nonzero coefficient.
/// The returned assignment satisfies every input form exactly.
pub fn solve_linear_system(
    forms: &[LinearForm],
) -> Result<BTreeMap<UnknownId, Rational>, SolveError> {
    let unknowns: Vec<UnknownId> = {
        let mut set = std::collections::BTreeSet::new();
        for form in forms {
            set.extend(form.coefficients.keys().copied());
        }
        set.into_iter().collect()
    };
    let n = unknowns.len();
    // form: c + sum(a_i u_i) = 0  ->  row [a_1 .. a_n | -c]
    let mut rows: Vec<Vec<Rational>> = forms
        .iter()
        .map(|form| {
            let mut row: Vec<Rational> =
                unknowns.iter().map(|u| form.coefficient(*u)).collect();
            row.push(-form.constant.clone());
            row
        })
        .collect();
    let m = rows.len();

    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        // Partial pivoting: the largest remaining entry by absolute value.
        let pivot = (rank..m)
            .filter(|&r| !rows[r][col].is_zero())
            .max_by(|&a, &b| rows[a][col].abs().cmp(&rows[b][col].abs()));
        let Some(pivot) = pivot else { continue };
        rows.swap(rank, pivot);
        for r in rank + 1..m {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = &rows[r][col] / &rows[rank][col];
            for c in col..=n {
                let delta = &factor * &rows[rank][c];
                rows[r][c] -= delta;
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == m {
            break;
        }
    }

    // A zero row with a nonzero right-hand side has no solution.
    for row in rows.iter().skip(rank) {
        if row[..n].iter().all(|v| v.is_zero()) && !row[n].is_zero() {
            return Err(SolveError::Inconsistent);
        }
    }
    if rank < n {
        return Err(SolveError::Underdetermined);
    }

    let mut values: Vec<Rational> = vec![Rational::zero(); n];
    for i in (0..rank).rev() {
        let col = pivot_cols[i];
        let mut rhs = rows[i][n].clone();
        for c in col + 1..n {
            rhs -= &rows[i][c] * &values[c];
        }
        values[col] = rhs / &rows[i][col];
    }

    let solution: BTreeMap<UnknownId, Rational> =
        unknowns.into_iter().zip(values).collect();
    debug_assert!(forms
        .iter()
        .all(|f| f.eval(&solution).map(|v| v.is_zero()).unwrap_or(false)));
    Ok(solution)
}
