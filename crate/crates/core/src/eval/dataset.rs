//! Dataset records, ingestion with rejection reporting, and seeded splits.
//!
//! The record format is JSON Lines: one UTF-8 object per line with fields
//! `{id, text, equations, answers}`. Answers may be JSON numbers or strings
//! (strings may carry fractions like `"3/4"`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equation::{solve_linear_system, to_linear_forms};
use crate::eval::answer_correct;
use crate::rational::{self, Rational};
use crate::rng::SeededRng;
use crate::text::{abstract_problem, AbstractError, AbstractedProblem, PipelineConfig, RawProblem};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("too few problems to split: {found} (need at least 3)")]
    TooFewProblems { found: usize },
    #[error("split ratios sum to {0}, not 1")]
    BadRatios(f64),
}

pub fn load_dataset(path: &Path) -> Result<Vec<RawProblem>, DataError> {
    let content = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    parse_records(&content)
}

pub fn parse_records(content: &str) -> Result<Vec<RawProblem>, DataError> {
    let mut problems = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| DataError::MalformedRecord { line: lineno, message: e.to_string() })?;
        let field = |name: &str| -> Result<String, DataError> {
            record
                .get(name)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| DataError::MalformedRecord {
                    line: lineno,
                    message: format!("missing string field '{name}'"),
                })
        };
        let id = field("id")?;
        let text = field("text")?;
        let gold_equations = field("equations")?;
        let answers = record.get("answers").and_then(|v| v.as_array()).ok_or_else(|| {
            DataError::MalformedRecord { line: lineno, message: "missing array field 'answers'".into() }
        })?;
        let mut gold_answers = Vec::with_capacity(answers.len());
        for a in answers {
            let value = match a {
                serde_json::Value::Number(n) => {
                    n.as_f64().and_then(rational::from_f64)
                }
                serde_json::Value::String(s) => rational::parse_number(s),
                _ => None,
            };
            let value = value.ok_or_else(|| DataError::MalformedRecord {
                line: lineno,
                message: format!("unparseable answer {a}"),
            })?;
            gold_answers.push(value);
        }
        problems.push(RawProblem { id, text, gold_equations, gold_answers });
    }
    Ok(problems)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionReason {
    EmptyText,
    EquationSyntax,
    NoUnknowns,
    Unalignable,
    /// Gold equations are nonlinear or otherwise unsolvable.
    GoldUnsolvable,
    /// Solving the gold equations does not reproduce the stated answers.
    AnswerMismatch,
}

impl RejectionReason {
    pub fn label(self) -> &'static str {
        match self {
            RejectionReason::EmptyText => "empty-text",
            RejectionReason::EquationSyntax => "equation-syntax",
            RejectionReason::NoUnknowns => "no-unknowns",
            RejectionReason::Unalignable => "unalignable",
            RejectionReason::GoldUnsolvable => "gold-unsolvable",
            RejectionReason::AnswerMismatch => "answer-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedProblem {
    pub id: String,
    pub reason: RejectionReason,
}

/// Counts for comparison against published dataset statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetReport {
    /// Raw records read.
    pub questions: usize,
    /// Records whose equations parse and abstract.
    pub abstracted: usize,
    /// Distinct canonical templates among abstracted records (before the
    /// alignment-soundness pruning).
    pub distinct_templates: usize,
    /// Records surviving the soundness check.
    pub accepted: usize,
    pub distinct_templates_accepted: usize,
    pub rejections: BTreeMap<String, usize>,
}

/// Abstract every problem and keep only those whose gold template, filled
/// with its own slot values, solves exactly to the stated answers. Problems
/// violating the check are flagged, never silently kept.
pub fn ingest(
    problems: &[RawProblem],
    config: &PipelineConfig,
) -> (Vec<AbstractedProblem>, Vec<RejectedProblem>, DatasetReport) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut templates_before = std::collections::BTreeSet::new();
    let mut abstracted_count = 0usize;

    for raw in problems {
        let abstracted = match abstract_problem(raw, config) {
            Ok(p) => p,
            Err(e) => {
                let reason = match e {
                    AbstractError::Text(_) => RejectionReason::EmptyText,
                    AbstractError::Equation(_) => RejectionReason::EquationSyntax,
                    AbstractError::Template(_) => RejectionReason::NoUnknowns,
                    AbstractError::Unalignable(_) => RejectionReason::Unalignable,
                };
                rejected.push(RejectedProblem { id: raw.id.clone(), reason });
                continue;
            }
        };
        abstracted_count += 1;
        let template = abstracted.template.as_ref().expect("ingest always sets a gold template");
        templates_before.insert(template.canonical().to_string());

        match alignment_soundness(&abstracted) {
            Soundness::Sound => accepted.push(abstracted),
            Soundness::Unsolvable => rejected.push(RejectedProblem {
                id: raw.id.clone(),
                reason: RejectionReason::GoldUnsolvable,
            }),
            Soundness::WrongAnswer => rejected.push(RejectedProblem {
                id: raw.id.clone(),
                reason: RejectionReason::AnswerMismatch,
            }),
        }
    }

    let distinct_after: std::collections::BTreeSet<&str> =
        accepted.iter().filter_map(|p| p.gold_canonical()).collect();
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    for r in &rejected {
        *rejections.entry(r.reason.label().to_string()).or_insert(0) += 1;
    }
    let report = DatasetReport {
        questions: problems.len(),
        abstracted: abstracted_count,
        distinct_templates: templates_before.len(),
        accepted: accepted.len(),
        distinct_templates_accepted: distinct_after.len(),
        rejections,
    };
    (accepted, rejected, report)
}

enum Soundness {
    Sound,
    Unsolvable,
    WrongAnswer,
}

fn alignment_soundness(problem: &AbstractedProblem) -> Soundness {
    let template = problem.template.as_ref().expect("gold template present");
    let Ok(concrete) = template.instantiate(&problem.slot_values()) else {
        return Soundness::Unsolvable;
    };
    let Ok(forms) = to_linear_forms(&concrete) else {
        return Soundness::Unsolvable;
    };
    let Ok(solution) = solve_linear_system(&forms) else {
        return Soundness::Unsolvable;
    };
    let answers: Vec<f64> = solution.values().map(rational::to_f64).collect();
    if answer_correct(&answers, &problem.gold_answers) {
        Soundness::Sound
    } else {
        Soundness::WrongAnswer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: &'static str,
    pub problems: Vec<AbstractedProblem>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: DatasetSplit,
    pub validation: DatasetSplit,
    pub test: DatasetSplit,
}

const SPLIT_STREAM: u64 = 0x5EED_5711;

/// Seeded shuffle then contiguous partition. Regeneration with the same seed
/// is identical; splits are disjoint by construction and cover the input.
pub fn make_splits(
    problems: Vec<AbstractedProblem>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Splits, DataError> {
    let n = problems.len();
    if n < 3 {
        return Err(DataError::TooFewProblems { found: n });
    }
    let sum = ratios.train + ratios.validation + ratios.test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios(sum));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed, SPLIT_STREAM).shuffle(&mut order);
    let shuffled: Vec<AbstractedProblem> = {
        let mut by_index: Vec<Option<AbstractedProblem>> = problems.into_iter().map(Some).collect();
        order.iter().map(|&i| by_index[i].take().expect("each index used once")).collect()
    };
    let n_train = (ratios.train * n as f64).floor() as usize;
    let n_val = (ratios.validation * n as f64).floor() as usize;
    let mut iter = shuffled.into_iter();
    let train: Vec<_> = iter.by_ref().take(n_train).collect();
    let validation: Vec<_> = iter.by_ref().take(n_val).collect();
    let test: Vec<_> = iter.collect();
    Ok(Splits {
        train: DatasetSplit { name: "train", problems: train, seed, ratios },
        validation: DatasetSplit { name: "validation", problems: validation, seed, ratios },
        test: DatasetSplit { name: "test", problems: test, seed, ratios },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn record(id: usize, a: i64, b: i64) -> String {
        format!(
            r#"{{"id": "p{id}", "text": "Sam had {a} pens and bought {b} more. How many pens now?", "equations": "{a} + {b} = x", "answers": [{}]}}"#,
            a + b
        )
    }

    fn fixture(n: usize) -> Vec<RawProblem> {
        let content: String =
            (0..n).map(|i| record(i, (i % 7 + 1) as i64, (i % 5 + 2) as i64) + "\n").collect();
        parse_records(&content).unwrap()
    }

    #[test]
    fn parses_records_with_numeric_and_string_answers() {
        let content = r#"{"id": "a", "text": "t 1", "equations": "x = 1", "answers": [1]}
{"id": "b", "text": "t 3/4", "equations": "x = 3/4", "answers": ["3/4"]}
"#;
        let problems = parse_records(content).unwrap();
        assert_eq!(problems.len(), 2);
        assert_eq!(problems[1].gold_answers[0], crate::rational::ratio(3, 4));
    }

    #[test]
    fn malformed_records_name_the_line() {
        let content = "{\"id\": \"a\"}\n";
        match parse_records(content) {
            Err(DataError::MalformedRecord { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed record, got {other:?}"),
        }
        match parse_records("not json\n") {
            Err(DataError::MalformedRecord { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_loads_zero_problems() {
        assert!(parse_records("").unwrap().is_empty());
    }

    #[test]
    fn ingest_rejects_bad_equations_with_reasons() {
        let problems = vec![
            RawProblem {
                id: "good".into(),
                text: "Sam had 2 pens and bought 3 more. How many?".into(),
                gold_equations: "2 + 3 = x".into(),
                gold_answers: vec![rat(5)],
            },
            RawProblem {
                id: "syntax".into(),
                text: "has 2 things".into(),
                gold_equations: "2 + = x".into(),
                gold_answers: vec![rat(2)],
            },
            RawProblem {
                id: "mismatch".into(),
                text: "has 2 and 3".into(),
                gold_equations: "2 + 3 = x".into(),
                gold_answers: vec![rat(99)],
            },
            RawProblem {
                id: "nonlinear".into(),
                text: "square of side 4".into(),
                gold_equations: "x * x = 4".into(),
                gold_answers: vec![rat(2)],
            },
        ];
        let (accepted, rejected, report) = ingest(&problems, &PipelineConfig::default());
        assert_eq!(accepted.len(), 1);
        assert_eq!(accepted[0].id, "good");
        assert_eq!(report.questions, 4);
        assert_eq!(report.accepted, 1);
        let reasons: BTreeMap<&str, RejectionReason> =
            rejected.iter().map(|r| (r.id.as_str(), r.reason)).collect();
        assert_eq!(reasons["syntax"], RejectionReason::EquationSyntax);
        assert_eq!(reasons["mismatch"], RejectionReason::AnswerMismatch);
        assert_eq!(reasons["nonlinear"], RejectionReason::GoldUnsolvable);
    }

    #[test]
    fn splits_partition_deterministically() {
        let (problems, _, _) = ingest(&fixture(10), &PipelineConfig::default());
        assert_eq!(problems.len(), 10);
        let a = make_splits(problems.clone(), SplitRatios::default(), 0).unwrap();
        assert_eq!(a.train.problems.len(), 8);
        assert_eq!(a.validation.problems.len(), 1);
        assert_eq!(a.test.problems.len(), 1);

        let b = make_splits(problems.clone(), SplitRatios::default(), 0).unwrap();
        let ids = |s: &DatasetSplit| s.problems.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.train), ids(&b.train));
        assert_eq!(ids(&a.test), ids(&b.test));

        // Disjoint and covering.
        let mut all: Vec<String> = ids(&a.train);
        all.extend(ids(&a.validation));
        all.extend(ids(&a.test));
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn different_seeds_differ() {
        let (problems, _, _) = ingest(&fixture(100), &PipelineConfig::default());
        let a = make_splits(problems.clone(), SplitRatios::default(), 0).unwrap();
        let b = make_splits(problems, SplitRatios::default(), 1).unwrap();
        let ids = |s: &DatasetSplit| s.problems.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        assert_ne!(ids(&a.train), ids(&b.train));
    }

    #[test]
    fn too_few_problems() {
        let (problems, _, _) = ingest(&fixture(2), &PipelineConfig::default());
        assert!(matches!(
            make_splits(problems, SplitRatios::default(), 0),
            Err(DataError::TooFewProblems { found: 2 })
        ));
    }
}
