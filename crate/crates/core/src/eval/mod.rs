//! Dataset ingestion, deterministic splits, metrics, and experiment
//! orchestration.

mod dataset;
mod experiment;
mod outcome;

pub use dataset::{
    ingest, load_dataset, make_splits, parse_records, DataError, DatasetReport, DatasetSplit,
    RejectedProblem, RejectionReason, SplitRatios, Splits,
};
pub use experiment::{
    evaluate_solver, load_solver_table, run_experiment, run_experiment_on, solve_with, Experiment,
    ExperimentConfig, RunError, SniChoice,
};
pub use outcome::{answer_correct, evaluate_template, FailureReason, SolveOutcome, ANSWER_TOLERANCE};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::AbstractedProblem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("empty test split")]
    EmptyTest,
    #[error(
        "oracle bound violated: solution accuracy {solution} exceeds oracle accuracy {oracle}"
    )]
    OracleBoundViolated { solution: f64, oracle: f64 },
    #[error(
        "outcome inconsistency for problem {id}: predicted template equals gold and instantiates, \
         but the solution is wrong"
    )]
    MetricInconsistency { id: String },
}

/// Fraction of test problems whose gold canonical template occurs in the
/// training split's template set — the ceiling for closed-class solvers.
pub fn oracle_accuracy(
    train: &[AbstractedProblem],
    test: &[AbstractedProblem],
) -> Result<f64, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let train_templates: std::collections::BTreeSet<&str> =
        train.iter().filter_map(|p| p.gold_canonical()).collect();
    let hits = test
        .iter()
        .filter(|p| p.gold_canonical().is_some_and(|c| train_templates.contains(c)))
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Aggregate metrics for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub solver: String,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub solution_accuracy: f64,
    /// Ceiling for retrieval/classification solvers; reported for all.
    pub oracle_accuracy: f64,
    /// Fraction of test problems whose predicted canonical equals gold.
    pub template_accuracy: f64,
    pub failure_counts: BTreeMap<String, usize>,
}

/// Score a batch of outcomes against their problems; enforces the
/// per-outcome consistency check (gold template predicted and instantiable
/// implies a correct solution).
pub fn summarize_outcomes(
    problems: &[AbstractedProblem],
    outcomes: &[SolveOutcome],
) -> Result<(f64, f64, BTreeMap<String, usize>), EvalError> {
    assert_eq!(problems.len(), outcomes.len());
    if problems.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let mut correct = 0usize;
    let mut template_hits = 0usize;
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for (problem, outcome) in problems.iter().zip(outcomes) {
        if outcome.correct {
            correct += 1;
        }
        let template_match = match (problem.gold_canonical(), outcome.predicted_template.as_deref())
        {
            (Some(gold), Some(pred)) => gold == pred,
            _ => false,
        };
        if template_match {
            template_hits += 1;
            if outcome.answers.is_some() && !outcome.correct {
                return Err(EvalError::MetricInconsistency { id: problem.id.clone() });
            }
        }
        if let Some(reason) = outcome.failure {
            *failures.entry(reason.label().to_string()).or_insert(0) += 1;
        }
    }
    let n = problems.len() as f64;
    Ok((correct as f64 / n, template_hits as f64 / n, failures))
}
