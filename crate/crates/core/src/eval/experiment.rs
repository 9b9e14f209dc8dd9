//! End-to-end experiment orchestration: ingest, split, train, evaluate,
//! report. Deterministic given (config, seed, dataset bytes).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{SolverKind, TrainedSolver};
use crate::classifier::{train_classifier, ClassifierConfig, ClassifierKind};
use crate::eval::{
    ingest, make_splits, oracle_accuracy, parse_records, summarize_outcomes, DataError,
    DatasetReport, EvalError, MetricsReport, SolveOutcome, Splits,
};
use crate::retrieval::{retrieve_and_solve, Corpus, EmbeddingError, EmbeddingTable, RetrievalMetric};
use crate::seq2seq::{train_seq2seq, Seq2SeqConfig};
use crate::text::tagger::{train_sni_tagger, SniTaggerConfig, TaggerError};
use crate::text::{AbstractedProblem, PipelineConfig, RawProblem, SniMode};
use crate::training::{TrainError, TrainingLog};
use crate::vocab::hash_bytes;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("solver {0} requires --embeddings <file>")]
    MissingEmbeddingFile(SolverKind),
}

/// Which backend flags significant numbers during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SniChoice {
    #[default]
    Rules,
    All,
    Tagger,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub solver: SolverKind,
    pub seed: u64,
    pub ratios: crate::eval::SplitRatios,
    pub sni: SniChoice,
    pub classifier: ClassifierConfig,
    pub seq2seq: Seq2SeqConfig,
    /// Embedding file for cosine retrieval or pretrained classifier init.
    pub embedding_file: Option<PathBuf>,
    /// Initialize the classifier embedding matrix from `embedding_file`.
    pub pretrained_embeddings: bool,
}

impl ExperimentConfig {
    pub fn new(solver: SolverKind) -> Self {
        let kind = match solver {
            SolverKind::SelfAttn => ClassifierKind::SelfAttn,
            _ => ClassifierKind::BiLstm,
        };
        Self {
            solver,
            seed: 0,
            ratios: crate::eval::SplitRatios::default(),
            sni: SniChoice::default(),
            classifier: ClassifierConfig::new(kind),
            seq2seq: Seq2SeqConfig::default(),
            embedding_file: None,
            pretrained_embeddings: false,
        }
    }

    /// Propagate the experiment seed into the model configs and pin the
    /// classifier kind to the solver.
    fn normalized(&self) -> Self {
        let mut config = self.clone();
        config.classifier.seed = config.seed;
        config.seq2seq.seed = config.seed;
        config.classifier.kind = match config.solver {
            SolverKind::SelfAttn => ClassifierKind::SelfAttn,
            _ => ClassifierKind::BiLstm,
        };
        config
    }

    pub fn hash(&self) -> String {
        hash_bytes(
            serde_json::to_string(&self.normalized())
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

pub struct Experiment {
    pub report: MetricsReport,
    pub outcomes: Vec<SolveOutcome>,
    pub training_log: Option<TrainingLog>,
    pub dataset_report: DatasetReport,
    pub solver: TrainedSolver,
    pub splits: Splits,
}

/// Solve one problem with any trained solver. Cosine retrieval requires the
/// embedding table it was built with.
pub fn solve_with(
    solver: &TrainedSolver,
    table: Option<&EmbeddingTable>,
    problem: &AbstractedProblem,
) -> Result<SolveOutcome, RunError> {
    match solver {
        TrainedSolver::Retrieval { kind, corpus, .. } => {
            let metric = match kind {
                SolverKind::Cosine => RetrievalMetric::Cosine(
                    table.ok_or(RunError::MissingEmbeddingFile(SolverKind::Cosine))?,
                ),
                _ => RetrievalMetric::Jaccard,
            };
            Ok(retrieve_and_solve(problem, corpus, &metric))
        }
        TrainedSolver::Classifier(model) => Ok(model.predict_and_solve(problem)),
        TrainedSolver::Seq2Seq(model) => Ok(model.generate_and_solve(problem)),
    }
}

/// Load the embedding table referenced by a solver, if it needs one.
pub fn load_solver_table(solver: &TrainedSolver) -> Result<Option<EmbeddingTable>, RunError> {
    match solver {
        TrainedSolver::Retrieval { kind: SolverKind::Cosine, embedding_file, .. } => {
            let path = embedding_file
                .as_ref()
                .ok_or(RunError::MissingEmbeddingFile(SolverKind::Cosine))?;
            Ok(Some(EmbeddingTable::load(path)?))
        }
        _ => Ok(None),
    }
}

/// Evaluate a frozen solver over a test split and assemble the report.
/// Asserts the oracle bound for retrieval and classification solvers.
pub fn evaluate_solver(
    solver: &TrainedSolver,
    table: Option<&EmbeddingTable>,
    train: &[AbstractedProblem],
    test: &[AbstractedProblem],
    seed: u64,
    config_hash: &str,
    dataset_hash: &str,
    validation_size: usize,
) -> Result<(MetricsReport, Vec<SolveOutcome>), RunError> {
    let outcomes: Vec<SolveOutcome> = test
        .iter()
        .map(|p| solve_with(solver, table, p))
        .collect::<Result<_, _>>()?;
    let (solution_accuracy, template_accuracy, failure_counts) =
        summarize_outcomes(test, &outcomes)?;
    let oracle = oracle_accuracy(train, test)?;
    if solver.kind().is_closed_class() && solution_accuracy > oracle {
        return Err(EvalError::OracleBoundViolated { solution: solution_accuracy, oracle }.into());
    }
    let report = MetricsReport {
        solver: solver.kind().label().to_string(),
        seed,
        config_hash: config_hash.to_string(),
        dataset_hash: dataset_hash.to_string(),
        train_size: train.len(),
        validation_size,
        test_size: test.len(),
        solution_accuracy,
        oracle_accuracy: oracle,
        template_accuracy,
        failure_counts,
    };
    Ok((report, outcomes))
}

/// Run a full experiment from a dataset file.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Path) -> Result<Experiment, RunError> {
    let bytes = std::fs::read(dataset)
        .map_err(|source| DataError::Io { path: dataset.display().to_string(), source })?;
    let content = String::from_utf8_lossy(&bytes);
    let problems = parse_records(&content)?;
    run_experiment_on(config, &problems, &hash_bytes(&bytes))
}

/// Run a full experiment on in-memory records (used by tests and fixtures).
pub fn run_experiment_on(
    config: &ExperimentConfig,
    problems: &[RawProblem],
    dataset_hash: &str,
) -> Result<Experiment, RunError> {
    let config = config.normalized();
    let pipeline = PipelineConfig {
        sni: match config.sni {
            SniChoice::All => SniMode::All,
            _ => SniMode::Rules,
        },
        ..PipelineConfig::default()
    };
    let (accepted, _rejected, dataset_report) = ingest(problems, &pipeline);
    let mut splits = make_splits(accepted, config.ratios, config.seed)?;

    if config.sni == SniChoice::Tagger {
        // Train the tagger on the raw records of the train split, then
        // re-abstract every split with it; membership is preserved, problems
        // that stop abstracting cleanly are dropped.
        let by_id: std::collections::HashMap<&str, &RawProblem> =
            problems.iter().map(|p| (p.id.as_str(), p)).collect();
        let train_raw: Vec<RawProblem> = splits
            .train
            .problems
            .iter()
            .filter_map(|p| by_id.get(p.id.as_str()).map(|&r| r.clone()))
            .collect();
        let tagger =
            train_sni_tagger(&train_raw, SniTaggerConfig { seed: config.seed, ..Default::default() })?;
        for split in [&mut splits.train, &mut splits.validation, &mut splits.test] {
            let re_abstracted: Vec<AbstractedProblem> = split
                .problems
                .iter()
                .filter_map(|p| by_id.get(p.id.as_str()))
                .filter_map(|raw| {
                    crate::text::abstract_problem_with(raw, &pipeline, Some(&tagger)).ok()
                })
                .collect();
            split.problems = re_abstracted;
        }
    }

    let config_hash = config.hash();
    let mut training_log = None;

    let table: Option<EmbeddingTable> = match (&config.embedding_file, config.solver) {
        (Some(path), SolverKind::Cosine) => Some(EmbeddingTable::load(path)?),
        (Some(path), _) if config.pretrained_embeddings => Some(EmbeddingTable::load(path)?),
        _ => None,
    };

    let solver = match config.solver {
        SolverKind::Jaccard => TrainedSolver::Retrieval {
            kind: SolverKind::Jaccard,
            corpus: Corpus::from_problems(&splits.train.problems),
            embedding_file: None,
        },
        SolverKind::Cosine => {
            if table.is_none() {
                return Err(RunError::MissingEmbeddingFile(SolverKind::Cosine));
            }
            TrainedSolver::Retrieval {
                kind: SolverKind::Cosine,
                corpus: Corpus::from_problems(&splits.train.problems),
                embedding_file: config.embedding_file.clone(),
            }
        }
        SolverKind::Bilstm | SolverKind::SelfAttn => {
            let pretrained = if config.pretrained_embeddings {
                if table.is_none() {
                    return Err(RunError::MissingEmbeddingFile(config.solver));
                }
                table.as_ref()
            } else {
                None
            };
            let (model, log) = train_classifier(
                config.classifier.clone(),
                &splits.train.problems,
                &splits.validation.problems,
                pretrained,
            )?;
            training_log = Some(log);
            TrainedSolver::Classifier(model)
        }
        SolverKind::Seq2seq => {
            let (model, log) = train_seq2seq(
                config.seq2seq.clone(),
                &splits.train.problems,
                &splits.validation.problems,
            )?;
            training_log = Some(log);
            TrainedSolver::Seq2Seq(model)
        }
    };

    let eval_table = match config.solver {
        SolverKind::Cosine => table.as_ref(),
        _ => None,
    };
    let (report, outcomes) = evaluate_solver(
        &solver,
        eval_table,
        &splits.train.problems,
        &splits.test.problems,
        config.seed,
        &config_hash,
        dataset_hash,
        splits.validation.problems.len(),
    )?;

    Ok(Experiment { report, outcomes, training_log, dataset_report, solver, splits })
}

impl MetricsReport {
    /// Human-readable table; the machine-readable form is the JSON
    /// serialization of the struct.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("solver              {}\n", self.solver));
        out.push_str(&format!("seed                {}\n", self.seed));
        out.push_str(&format!("config hash         {}\n", self.config_hash));
        out.push_str(&format!("dataset hash        {}\n", self.dataset_hash));
        out.push_str(&format!(
            "splits              train {} / validation {} / test {}\n",
            self.train_size, self.validation_size, self.test_size
        ));
        out.push_str(&format!("solution accuracy   {:.4}\n", self.solution_accuracy));
        out.push_str(&format!("oracle accuracy     {:.4}\n", self.oracle_accuracy));
        out.push_str(&format!("template accuracy   {:.4}\n", self.template_accuracy));
        if self.failure_counts.is_empty() {
            out.push_str("failures            none\n");
        } else {
            out.push_str("failures\n");
            for (reason, count) in &self.failure_counts {
                out.push_str(&format!("  {reason:<18}{count}\n"));
            }
        }
        out
    }
}
