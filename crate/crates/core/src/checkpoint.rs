//! Versioned checkpoint container.
//!
//! Layout: an 8-byte magic, a JSON manifest (model kind, hyperparameters,
//! vocabularies and their hashes), then per-parameter entries of
//! `name, shape, raw little-endian f64 payload`. Loading validates the
//! magic, version, parameter shapes against the rebuilt model, and the
//! vocabulary hashes. Writes go through a temp file + rename so checkpoints
//! appear atomically.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, ClassifierModel};
use crate::equation::EquationTemplate;
use crate::neural::{ParamSet, Tensor};
use crate::retrieval::Corpus;
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqModel, TargetVocab};
use crate::text::AbstractedProblem;
use crate::vocab::{TemplateVocab, TokenVocab};

const MAGIC: &[u8; 8] = b"MWPCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("parameter {name}: shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("parameter list does not match the model ({0})")]
    ParamMismatch(String),
    #[error("{which} vocabulary hash mismatch")]
    VocabHashMismatch { which: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Jaccard,
    Cosine,
    Bilstm,
    SelfAttn,
    Seq2seq,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Jaccard => "jaccard",
            SolverKind::Cosine => "cosine",
            SolverKind::Bilstm => "bilstm",
            SolverKind::SelfAttn => "self_attn",
            SolverKind::Seq2seq => "seq2seq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jaccard" => Some(SolverKind::Jaccard),
            "cosine" => Some(SolverKind::Cosine),
            "bilstm" => Some(SolverKind::Bilstm),
            "self_attn" => Some(SolverKind::SelfAttn),
            "seq2seq" => Some(SolverKind::Seq2seq),
            _ => None,
        }
    }

    pub fn is_closed_class(self) -> bool {
        !matches!(self, SolverKind::Seq2seq)
    }

    pub fn is_neural(self) -> bool {
        matches!(self, SolverKind::Bilstm | SolverKind::SelfAttn | SolverKind::Seq2seq)
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub tokens: Vec<String>,
    pub template: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub solver: SolverKind,
    pub seed: u64,
    pub dataset_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq2seq: Option<Seq2SeqConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_vocab: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_vocab_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_classes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_vocab_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_vocab: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_vocab_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<Vec<CorpusRecord>>,
    /// Cosine retrieval: path of the embedding file to reload at solve time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_file: Option<String>,
}

impl Manifest {
    fn new(solver: SolverKind, seed: u64, dataset_hash: String) -> Self {
        Self {
            version: VERSION,
            solver,
            seed,
            dataset_hash,
            classifier: None,
            seq2seq: None,
            source_vocab: None,
            source_vocab_hash: None,
            template_classes: None,
            template_vocab_hash: None,
            target_vocab: None,
            target_vocab_hash: None,
            corpus: None,
            embedding_file: None,
        }
    }
}

/// A trained solver ready to be saved or used for solving.
pub enum TrainedSolver {
    Retrieval { kind: SolverKind, corpus: Corpus, embedding_file: Option<PathBuf> },
    Classifier(ClassifierModel),
    Seq2Seq(Seq2SeqModel),
}

impl TrainedSolver {
    pub fn kind(&self) -> SolverKind {
        match self {
            TrainedSolver::Retrieval { kind, .. } => *kind,
            TrainedSolver::Classifier(m) => match m.config.kind {
                crate::classifier::ClassifierKind::BiLstm => SolverKind::Bilstm,
                crate::classifier::ClassifierKind::SelfAttn => SolverKind::SelfAttn,
            },
            TrainedSolver::Seq2Seq(_) => SolverKind::Seq2seq,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.display().to_string(), source }
}

pub fn save(
    solver: &TrainedSolver,
    seed: u64,
    dataset_hash: &str,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut manifest = Manifest::new(solver.kind(), seed, dataset_hash.to_string());
    let empty = ParamSet::new();
    let params: &ParamSet = match solver {
        TrainedSolver::Retrieval { corpus, embedding_file, .. } => {
            manifest.corpus = Some(
                corpus
                    .items()
                    .iter()
                    .map(|(p, t)| CorpusRecord {
                        tokens: p.tokens.clone(),
                        template: t.canonical().to_string(),
                    })
                    .collect(),
            );
            manifest.embedding_file =
                embedding_file.as_ref().map(|p| p.display().to_string());
            &empty
        }
        TrainedSolver::Classifier(model) => {
            manifest.classifier = Some(model.config.clone());
            manifest.source_vocab = Some(model.token_vocab.tokens().to_vec());
            manifest.source_vocab_hash = Some(model.token_vocab.hash());
            manifest.template_classes = Some(model.template_vocab.classes().to_vec());
            manifest.template_vocab_hash = Some(model.template_vocab.hash());
            &model.params
        }
        TrainedSolver::Seq2Seq(model) => {
            manifest.seq2seq = Some(model.config.clone());
            manifest.source_vocab = Some(model.source_vocab.tokens().to_vec());
            manifest.source_vocab_hash = Some(model.source_vocab.hash());
            manifest.target_vocab = Some(model.target_vocab.tokens().to_vec());
            manifest.target_vocab_hash = Some(model.target_vocab.hash());
            &model.params
        }
    };

    let mut buffer = Vec::new();
    buffer.extend_from_slice(MAGIC);
    let manifest_bytes =
        serde_json::to_vec(&manifest).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    buffer.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
    buffer.extend_from_slice(&manifest_bytes);
    buffer.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        buffer.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        buffer.extend_from_slice(p.name.as_bytes());
        buffer.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &dim in p.value.shape() {
            buffer.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in p.value.data() {
            buffer.extend_from_slice(&v.to_le_bytes());
        }
    }

    // Atomic publish: write a sibling temp file, then rename over the target.
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut file = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(&buffer).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Corrupt("unexpected end of file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub struct LoadedCheckpoint {
    pub manifest: Manifest,
    pub solver: TrainedSolver,
}

pub fn load(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    let mut reader = Reader { bytes: &bytes, pos: 0 };

    if reader.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let manifest_len = reader.u32()? as usize;
    let manifest: Manifest = serde_json::from_slice(reader.take(manifest_len)?)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if manifest.version != VERSION {
        return Err(CheckpointError::Version(manifest.version));
    }

    let count = reader.u32()? as usize;
    let mut entries: Vec<(String, Tensor)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = reader.u32()? as usize;
        let name = String::from_utf8(reader.take(name_len)?.to_vec())
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let rank = reader.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(reader.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(reader.take(8)?.try_into().unwrap()));
        }
        entries.push((name, Tensor::new(shape, data)));
    }

    let solver = rebuild(&manifest, entries)?;
    Ok(LoadedCheckpoint { manifest, solver })
}

fn rebuild(
    manifest: &Manifest,
    entries: Vec<(String, Tensor)>,
) -> Result<TrainedSolver, CheckpointError> {
    match manifest.solver {
        SolverKind::Jaccard | SolverKind::Cosine => {
            let records = manifest
                .corpus
                .as_ref()
                .ok_or_else(|| CheckpointError::Corrupt("retrieval manifest has no corpus".into()))?;
            let items = records
                .iter()
                .map(|r| {
                    let template = EquationTemplate::parse(&r.template)
                        .map_err(|e| CheckpointError::Corrupt(format!("bad template: {e}")))?;
                    Ok((
                        AbstractedProblem {
                            id: String::new(),
                            tokens: r.tokens.clone(),
                            mentions: Vec::new(),
                            template: Some(template.clone()),
                            gold_answers: Vec::new(),
                        },
                        template,
                    ))
                })
                .collect::<Result<Vec<_>, CheckpointError>>()?;
            Ok(TrainedSolver::Retrieval {
                kind: manifest.solver,
                corpus: Corpus::new(items),
                embedding_file: manifest.embedding_file.as_ref().map(PathBuf::from),
            })
        }
        SolverKind::Bilstm | SolverKind::SelfAttn => {
            let config: ClassifierConfig = manifest
                .classifier
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing classifier config".into()))?;
            let tokens = manifest
                .source_vocab
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing source vocab".into()))?;
            let token_vocab = TokenVocab::from_tokens(tokens);
            check_hash("source", &token_vocab.hash(), manifest.source_vocab_hash.as_deref())?;
            let classes = manifest
                .template_classes
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing template classes".into()))?;
            let template_vocab = TemplateVocab::from_classes(classes)
                .map_err(|e| CheckpointError::Corrupt(format!("bad template class: {e}")))?;
            check_hash("template", &template_vocab.hash(), manifest.template_vocab_hash.as_deref())?;
            let mut model = ClassifierModel::init(config, token_vocab, template_vocab);
            fill_params(&mut model.params, entries)?;
            Ok(TrainedSolver::Classifier(model))
        }
        SolverKind::Seq2seq => {
            let config: Seq2SeqConfig = manifest
                .seq2seq
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing seq2seq config".into()))?;
            let tokens = manifest
                .source_vocab
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing source vocab".into()))?;
            let source_vocab = TokenVocab::from_tokens(tokens);
            check_hash("source", &source_vocab.hash(), manifest.source_vocab_hash.as_deref())?;
            let target_tokens = manifest
                .target_vocab
                .clone()
                .ok_or_else(|| CheckpointError::Corrupt("missing target vocab".into()))?;
            let target_vocab = TargetVocab::from_tokens(target_tokens);
            check_hash("target", &target_vocab.hash(), manifest.target_vocab_hash.as_deref())?;
            let mut model = Seq2SeqModel::init(config, source_vocab, target_vocab);
            fill_params(&mut model.params, entries)?;
            Ok(TrainedSolver::Seq2Seq(model))
        }
    }
}

fn check_hash(
    which: &'static str,
    computed: &str,
    stored: Option<&str>,
) -> Result<(), CheckpointError> {
    match stored {
        Some(stored) if stored == computed => Ok(()),
        _ => Err(CheckpointError::VocabHashMismatch { which }),
    }
}

/// Copy checkpoint entries into a freshly initialized model, insisting on an
/// exact name and shape match.
fn fill_params(
    set: &mut ParamSet,
    entries: Vec<(String, Tensor)>,
) -> Result<(), CheckpointError> {
    if entries.len() != set.len() {
        return Err(CheckpointError::ParamMismatch(format!(
            "expected {} parameters, found {}",
            set.len(),
            entries.len()
        )));
    }
    for (id, (name, tensor)) in set.ids().collect::<Vec<_>>().into_iter().zip(entries) {
        let param = set.get_mut(id);
        if param.name != name {
            return Err(CheckpointError::ParamMismatch(format!(
                "expected parameter {}, found {}",
                param.name, name
            )));
        }
        if param.value.shape() != tensor.shape() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: param.value.shape().to_vec(),
                found: tensor.shape().to_vec(),
            });
        }
        param.value = tensor;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train_classifier, ClassifierKind};
    use crate::rational::rat;
    use crate::text::{abstract_problem, PipelineConfig, RawProblem};

    fn problem(id: &str, text: &str, equations: &str, answer: i64) -> AbstractedProblem {
        let raw = RawProblem {
            id: id.into(),
            text: text.into(),
            gold_equations: equations.into(),
            gold_answers: vec![rat(answer)],
        };
        abstract_problem(&raw, &PipelineConfig::default()).unwrap()
    }

    fn train_small() -> (Vec<AbstractedProblem>, Vec<AbstractedProblem>) {
        let train = vec![
            problem("a", "Tom had 3 apples and bought 4 more. How many in all?", "3 + 4 = x", 7),
            problem("b", "Pam had 2 apples and bought 9 more. How many in all?", "2 + 9 = x", 11),
            problem("c", "Each of 5 crates holds 6 jars. How many jars altogether?", "5 * 6 = x", 30),
            problem("d", "Each of 2 crates holds 8 jars. How many jars altogether?", "2 * 8 = x", 16),
        ];
        let val = vec![train[0].clone(), train[2].clone()];
        (train, val)
    }

    #[test]
    fn classifier_round_trips_bit_exactly() {
        let (train, val) = train_small();
        let config = ClassifierConfig {
            embedding_dim: 8,
            hidden_dim: 8,
            epochs: 3,
            unk_min_freq: 1,
            dropout: 0.0,
            batch_size: 2,
            ..ClassifierConfig::new(ClassifierKind::BiLstm)
        };
        let (model, _) = train_classifier(config, &train, &val, None).unwrap();
        let dir = std::env::temp_dir().join(format!("mwp-ckpt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("clf.ckpt");
        let expected: Vec<Vec<f64>> = model.params.iter().map(|p| p.value.data().to_vec()).collect();
        let probs = model.classify_logits(&train[0].tokens).unwrap();

        save(&TrainedSolver::Classifier(model), 0, "deadbeef", &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.manifest.solver, SolverKind::Bilstm);
        assert_eq!(loaded.manifest.dataset_hash, "deadbeef");
        match loaded.solver {
            TrainedSolver::Classifier(model2) => {
                let got: Vec<Vec<f64>> =
                    model2.params.iter().map(|p| p.value.data().to_vec()).collect();
                assert_eq!(expected, got);
                assert_eq!(model2.classify_logits(&train[0].tokens).unwrap(), probs);
            }
            _ => panic!("wrong solver kind"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn retrieval_corpus_round_trips() {
        let (train, _) = train_small();
        let corpus = Corpus::from_problems(&train);
        let dir = std::env::temp_dir().join(format!("mwp-ckpt-test2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("jaccard.ckpt");
        save(
            &TrainedSolver::Retrieval {
                kind: SolverKind::Jaccard,
                corpus,
                embedding_file: None,
            },
            7,
            "cafe",
            &path,
        )
        .unwrap();
        let loaded = load(&path).unwrap();
        match loaded.solver {
            TrainedSolver::Retrieval { corpus, .. } => {
                assert_eq!(corpus.len(), 4);
                let test = problem(
                    "q",
                    "Lee had 6 apples and bought 1 more. How many in all?",
                    "6 + 1 = x",
                    7,
                );
                let outcome = crate::retrieval::retrieve_and_solve(
                    &test,
                    &corpus,
                    &crate::retrieval::RetrievalMetric::Jaccard,
                );
                assert!(outcome.correct);
            }
            _ => panic!("wrong solver kind"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_magic_and_truncation_are_rejected() {
        let dir = std::env::temp_dir().join(format!("mwp-ckpt-test3-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadMagic)));
        std::fs::write(&path, b"MWP").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::Corrupt(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
