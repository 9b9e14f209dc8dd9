//! Per-problem solve outcomes and answer checking.

use serde::{Deserialize, Serialize};

use crate::equation::{solve_linear_system, to_linear_forms, EquationTemplate, LinearizeError};
use crate::rational::{to_f64, Rational};
use crate::text::AbstractedProblem;

/// Relative-or-absolute tolerance for numeric answer comparison.
pub const ANSWER_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    /// Decoded token sequence is not a valid equation set (includes UNK).
    Unparseable,
    /// Predicted template needs a slot the problem does not provide.
    UnknownSlot,
    /// Instantiated equations are not linear (or divide by zero).
    Nonlinear,
    /// Decoder hit the length cap without emitting EOS.
    NonTerminated,
    /// Linear system had no unique solution.
    SolverFailed,
    /// Answers were produced but do not match gold.
    WrongAnswer,
}

impl FailureReason {
    pub fn label(self) -> &'static str {
        match self {
            FailureReason::Unparseable => "unparseable",
            FailureReason::UnknownSlot => "unknown-slot",
            FailureReason::Nonlinear => "nonlinear",
            FailureReason::NonTerminated => "non-terminated",
            FailureReason::SolverFailed => "solver-failed",
            FailureReason::WrongAnswer => "wrong-answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub problem_id: String,
    /// Canonical string of the predicted template, when one was produced.
    pub predicted_template: Option<String>,
    /// Numeric answers in unknown order (x, y, z), when solving succeeded.
    pub answers: Option<Vec<f64>>,
    pub correct: bool,
    /// Present iff the outcome is not correct.
    pub failure: Option<FailureReason>,
}

impl SolveOutcome {
    pub fn failed(problem_id: &str, template: Option<String>, reason: FailureReason) -> Self {
        Self {
            problem_id: problem_id.to_string(),
            predicted_template: template,
            answers: None,
            correct: false,
            failure: Some(reason),
        }
    }
}

/// Multiset comparison at `|p - g| <= tol * max(1, |g|)` after sorting.
pub fn answer_correct(predicted: &[f64], gold: &[Rational]) -> bool {
    if predicted.len() != gold.len() || predicted.is_empty() {
        return false;
    }
    let mut p = predicted.to_vec();
    let mut g: Vec<f64> = gold.iter().map(to_f64).collect();
    p.sort_by(f64::total_cmp);
    g.sort_by(f64::total_cmp);
    p.iter()
        .zip(&g)
        .all(|(p, g)| (p - g).abs() <= ANSWER_TOLERANCE * g.abs().max(1.0))
}

/// Instantiate a predicted template with the problem's slot values, solve it
/// exactly, and compare against the gold answers. Every failure mode becomes
/// a wrong outcome with its reason recorded; nothing here is an error.
pub fn evaluate_template(problem: &AbstractedProblem, template: &EquationTemplate) -> SolveOutcome {
    let canonical = Some(template.canonical().to_string());
    let values = problem.slot_values();
    let concrete = match template.instantiate(&values) {
        Ok(set) => set,
        Err(_) => return SolveOutcome::failed(&problem.id, canonical, FailureReason::UnknownSlot),
    };
    let forms = match to_linear_forms(&concrete) {
        Ok(forms) => forms,
        Err(LinearizeError::UnresolvedSlot(_)) => {
            return SolveOutcome::failed(&problem.id, canonical, FailureReason::UnknownSlot)
        }
        Err(_) => return SolveOutcome::failed(&problem.id, canonical, FailureReason::Nonlinear),
    };
    let solution = match solve_linear_system(&forms) {
        Ok(s) => s,
        Err(_) => return SolveOutcome::failed(&problem.id, canonical, FailureReason::SolverFailed),
    };
    let answers: Vec<f64> = solution.values().map(to_f64).collect();
    let correct = answer_correct(&answers, &problem.gold_answers);
    SolveOutcome {
        problem_id: problem.id.clone(),
        predicted_template: canonical,
        answers: Some(answers),
        correct,
        failure: if correct { None } else { Some(FailureReason::WrongAnswer) },
    }
}
