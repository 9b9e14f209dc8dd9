//! Equation-template classification: a BiLSTM encoder with a softmax over
//! the closed set of training templates, plus the structured self-attention
//! variant (multi-hop attention with a redundancy penalty).

use serde::{Deserialize, Serialize};

use crate::eval::{evaluate_template, FailureReason, SolveOutcome};
use crate::neural::{
    bilstm_encode, bucketed_batches, gradient_check, sgd_epoch, LstmParams, NeuralError, NodeId,
    OptimizerState, ParamId, ParamSet, Tape, Tensor,
};
use crate::retrieval::EmbeddingTable;
use crate::rng::SeededRng;
use crate::text::AbstractedProblem;
use crate::training::{streams, BestCheckpoint, EpochLog, TrainError, TrainingLog};
use crate::vocab::{TemplateVocab, TokenVocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    BiLstm,
    SelfAttn,
}

pub use crate::training::DropoutPlacement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub embedding_dim: usize,
    /// Hidden size per direction; the encoder output is twice this.
    pub hidden_dim: usize,
    pub dropout: f64,
    pub dropout_placement: DropoutPlacement,
    /// Self-attention only: d_a, hop count r, and the penalty coefficient
    /// on ||AAᵀ - I||_F².
    pub attn_dim: usize,
    pub attn_hops: usize,
    pub penalty_coeff: f64,
    /// Half-range of the uniform parameter initialization.
    pub init_scale: f64,
    pub unk_min_freq: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn new(kind: ClassifierKind) -> Self {
        Self {
            kind,
            embedding_dim: 128,
            hidden_dim: 256,
            dropout: 0.3,
            dropout_placement: DropoutPlacement::default(),
            attn_dim: 64,
            attn_hops: 4,
            penalty_coeff: 1.0,
            init_scale: crate::neural::DEFAULT_INIT_SCALE,
            unk_min_freq: 2,
            epochs: 50,
            batch_size: 32,
            initial_lr: 1.0,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

struct ClassifierIds {
    embedding: ParamId,
    fwd: LstmParams,
    bwd: LstmParams,
    output: ParamId,
    attn_proj: Option<ParamId>, // W_s1: (d_a, 2*hidden)
    attn_hops: Option<ParamId>, // W_s2: (r, d_a)
}

pub struct ClassifierModel {
    pub config: ClassifierConfig,
    pub token_vocab: TokenVocab,
    pub template_vocab: TemplateVocab,
    pub params: ParamSet,
    ids: ClassifierIds,
}

impl ClassifierModel {
    /// Seeded parameter initialization; weights are uniform in (-0.08, 0.08).
    pub fn init(
        config: ClassifierConfig,
        token_vocab: TokenVocab,
        template_vocab: TemplateVocab,
    ) -> Self {
        let mut rng = SeededRng::new(config.seed, streams::INIT);
        let mut params = ParamSet::new();
        let scale = config.init_scale;
        let v = token_vocab.len();
        let (e, h, k) = (config.embedding_dim, config.hidden_dim, template_vocab.len());
        let embedding = params.add_uniform("embedding", vec![v, e], scale, &mut rng);
        let fwd = LstmParams::new(&mut params, "encoder.fwd", e, h, scale, &mut rng);
        let bwd = LstmParams::new(&mut params, "encoder.bwd", e, h, scale, &mut rng);
        let (output, attn_proj, attn_hops) = match config.kind {
            ClassifierKind::BiLstm => {
                (params.add_uniform("output", vec![k, 2 * h], scale, &mut rng), None, None)
            }
            ClassifierKind::SelfAttn => {
                let w_s1 =
                    params.add_uniform("attention.proj", vec![config.attn_dim, 2 * h], scale, &mut rng);
                let w_s2 =
                    params.add_uniform("attention.hops", vec![config.attn_hops, config.attn_dim], scale, &mut rng);
                let output =
                    params.add_uniform("output", vec![k, config.attn_hops * 2 * h], scale, &mut rng);
                (output, Some(w_s1), Some(w_s2))
            }
        };
        let ids = ClassifierIds { embedding, fwd, bwd, output, attn_proj, attn_hops };
        Self { config, token_vocab, template_vocab, params, ids }
    }

    /// Overwrite embedding rows for tokens present in a pretrained table.
    /// Returns how many rows were initialized from the file.
    pub fn load_pretrained_embeddings(&mut self, table: &EmbeddingTable) -> Result<usize, TrainError> {
        if table.dimension() != self.config.embedding_dim {
            return Err(TrainError::EmbeddingDimMismatch {
                file: table.dimension(),
                config: self.config.embedding_dim,
            });
        }
        let mut set_rows = 0;
        let e = self.config.embedding_dim;
        let tokens: Vec<String> = self.token_vocab.tokens().to_vec();
        let w = self.params.get_mut(self.ids.embedding);
        for (row, token) in tokens.iter().enumerate() {
            if let Some(vector) = table.get(token) {
                w.value.data_mut()[row * e..(row + 1) * e].copy_from_slice(vector);
                set_rows += 1;
            }
        }
        Ok(set_rows)
    }

    /// Forward to logits; self-attention additionally returns its penalty.
    /// The parameter set is passed explicitly so training can split borrows
    /// between the optimizer and the model description.
    fn forward(
        &self,
        tape: &mut Tape,
        set: &ParamSet,
        token_ids: &[usize],
        rng: &mut SeededRng,
    ) -> Result<(NodeId, Option<NodeId>), NeuralError> {
        if token_ids.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let cfg = &self.config;
        let embedding = tape.param(set, self.ids.embedding);
        let inputs = tape.embedding_lookup(embedding, token_ids)?;
        let fwd = self.ids.fwd.bind(tape, set);
        let bwd = self.ids.bwd.bind(tape, set);
        let states = bilstm_encode(tape, &fwd, &bwd, &inputs)?;

        match cfg.kind {
            ClassifierKind::BiLstm => {
                let mut h_n = states.final_state;
                if cfg.dropout_placement.on_encoder() {
                    h_n = tape.dropout(h_n, cfg.dropout, rng)?;
                }
                if cfg.dropout_placement.on_classifier_input() {
                    h_n = tape.dropout(h_n, cfg.dropout, rng)?;
                }
                let output = tape.param(set, self.ids.output);
                let logits = tape.matmul(output, h_n)?;
                Ok((logits, None))
            }
            ClassifierKind::SelfAttn => {
                let mut h_matrix = states.matrix;
                if cfg.dropout_placement.on_encoder() {
                    h_matrix = tape.dropout(h_matrix, cfg.dropout, rng)?;
                }
                let w_s1 = tape.param(set, self.ids.attn_proj.expect("self-attn params"));
                let w_s2 = tape.param(set, self.ids.attn_hops.expect("self-attn params"));
                let (embedding, penalty, _) = self_attention(tape, w_s1, w_s2, h_matrix)?;
                let mut input = embedding;
                if cfg.dropout_placement.on_classifier_input() {
                    input = tape.dropout(input, cfg.dropout, rng)?;
                }
                let output = tape.param(set, self.ids.output);
                let logits = tape.matmul(output, input)?;
                Ok((logits, Some(penalty)))
            }
        }
    }

    /// Class distribution for an abstracted token sequence.
    pub fn classify_logits(&self, tokens: &[String]) -> Result<Vec<f64>, NeuralError> {
        let ids = self.token_vocab.encode(tokens);
        let mut tape = Tape::inference();
        let mut rng = SeededRng::new(0, 0);
        let (logits, _) = self.forward(&mut tape, &self.params, &ids, &mut rng)?;
        let probs = tape.softmax(logits);
        Ok(tape.value(probs).data().to_vec())
    }

    pub fn predict_class(&self, tokens: &[String]) -> Result<usize, NeuralError> {
        let probs = self.classify_logits(tokens)?;
        Ok(argmax(&probs))
    }

    /// Predict a template class and solve the problem with it.
    pub fn predict_and_solve(&self, problem: &AbstractedProblem) -> SolveOutcome {
        match self.predict_class(&problem.tokens) {
            Ok(class) => evaluate_template(problem, self.template_vocab.template(class)),
            Err(_) => SolveOutcome::failed(&problem.id, None, FailureReason::Unparseable),
        }
    }

    /// Training loss for one example: cross entropy, plus the attention
    /// penalty scaled by its coefficient for the self-attention variant.
    fn example_loss(
        &self,
        tape: &mut Tape,
        set: &ParamSet,
        token_ids: &[usize],
        class: usize,
        rng: &mut SeededRng,
    ) -> Result<NodeId, NeuralError> {
        let (logits, penalty) = self.forward(tape, set, token_ids, rng)?;
        let ce = tape.cross_entropy(logits, class)?;
        match penalty {
            Some(p) => {
                let scaled = tape.scale(p, self.config.penalty_coeff);
                tape.add(ce, scaled)
            }
            None => Ok(ce),
        }
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Structured self-attention over per-step states `H (T, d)`:
/// `A = softmax(W_s2 tanh(W_s1 Hᵀ))` row-wise, embedding `M = A H` flattened,
/// penalty `P = ||AAᵀ - I||_F²`. Also returns `A` for inspection.
pub fn self_attention(
    tape: &mut Tape,
    w_s1: NodeId,
    w_s2: NodeId,
    h_matrix: NodeId,
) -> Result<(NodeId, NodeId, NodeId), NeuralError> {
    let h_t = tape.transpose(h_matrix)?;
    let proj = tape.matmul(w_s1, h_t)?;
    let proj = tape.tanh(proj);
    let scores = tape.matmul(w_s2, proj)?;
    let attention = tape.softmax(scores); // (r, T), row-stochastic
    let embedding_matrix = tape.matmul(attention, h_matrix)?;
    let flat = tape.flatten(embedding_matrix);

    let attn_t = tape.transpose(attention)?;
    let gram = tape.matmul(attention, attn_t)?;
    let hops = tape.value(gram).rows();
    let identity = tape.constant(identity_matrix(hops));
    let diff = tape.sub(gram, identity)?;
    let squared = tape.mul(diff, diff)?;
    let penalty = tape.sum_all(squared);
    Ok((flat, penalty, attention))
}

fn identity_matrix(n: usize) -> Tensor {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
    }
    Tensor::matrix(n, n, data)
}

/// Train a classifier on the given splits. Per-epoch validation runs the
/// full predict-and-solve path; the checkpoint with the best validation
/// solution accuracy is kept, and the learning rate follows the
/// perplexity-halving schedule.
pub fn train_classifier(
    config: ClassifierConfig,
    train: &[AbstractedProblem],
    validation: &[AbstractedProblem],
    pretrained: Option<&EmbeddingTable>,
) -> Result<(ClassifierModel, TrainingLog), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if validation.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let token_vocab =
        TokenVocab::build(train.iter().map(|p| p.tokens.as_slice()), config.unk_min_freq);
    let template_vocab = TemplateVocab::build(train).ok_or(TrainError::EmptyVocab)?;
    let mut model = ClassifierModel::init(config, token_vocab, template_vocab);
    if let Some(table) = pretrained {
        model.load_pretrained_embeddings(table)?;
    }
    let log = model.fit(train, validation)?;
    Ok((model, log))
}

impl ClassifierModel {
    /// Run the training loop on an already-initialized model.
    pub fn fit(
        &mut self,
        train: &[AbstractedProblem],
        validation: &[AbstractedProblem],
    ) -> Result<TrainingLog, TrainError> {
        fit(self, train, validation)
    }
}

fn fit(
    model: &mut ClassifierModel,
    train: &[AbstractedProblem],
    validation: &[AbstractedProblem],
) -> Result<TrainingLog, TrainError> {
    let examples: Vec<(Vec<usize>, usize)> = train
        .iter()
        .filter_map(|p| {
            let class = model.template_vocab.class_of(p.gold_canonical()?)?;
            Some((model.token_vocab.encode(&p.tokens), class))
        })
        .collect();
    if examples.is_empty() {
        return Err(TrainError::EmptyVocab);
    }
    let lengths: Vec<usize> = examples.iter().map(|(ids, _)| ids.len()).collect();
    let seed = model.config.seed;
    let mut optimizer = OptimizerState::new(model.config.initial_lr);
    let mut best = BestCheckpoint::new();
    let mut log = TrainingLog::default();

    let clip = model.config.grad_clip;
    let batch_size = model.config.batch_size;
    for epoch in 1..=model.config.epochs {
        let mut batch_rng = SeededRng::new(seed, streams::BATCHES ^ epoch as u64);
        let mut dropout_rng = SeededRng::new(seed, streams::DROPOUT ^ epoch as u64);
        let batches = bucketed_batches(&lengths, batch_size, &mut batch_rng);

        // Params leave the model for the epoch so the optimizer can mutate
        // them while the closure reads the model description.
        let mut params = std::mem::take(&mut model.params);
        let result =
            sgd_epoch(&mut params, &batches, optimizer.learning_rate, clip, |set, idx| {
                let (ids, class) = &examples[idx];
                let mut tape = Tape::training();
                let loss = model.example_loss(&mut tape, set, ids, *class, &mut dropout_rng)?;
                let grads = tape.backward(loss);
                tape.apply_gradients(&grads, set);
                Ok(tape.value(loss).item())
            });
        model.params = params;
        let train_loss = result?;

        let (val_loss, accuracy) = validate(model, validation)?;
        let val_perplexity = val_loss.exp();
        optimizer.maybe_halve(epoch, val_perplexity);
        best.offer(&model.params, epoch, accuracy);
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_perplexity,
            val_solution_accuracy: accuracy,
            learning_rate: optimizer.learning_rate,
        });
    }
    let (best_epoch, best_acc) = best.restore(&mut model.params);
    log.best_epoch = best_epoch;
    log.best_val_solution_accuracy = best_acc;
    Ok(log)
}

/// Mean validation cross entropy and validation solution accuracy.
fn validate(
    model: &ClassifierModel,
    validation: &[AbstractedProblem],
) -> Result<(f64, f64), TrainError> {
    let mut total_ce = 0.0;
    let mut counted = 0usize;
    let mut correct = 0usize;
    for problem in validation {
        let ids = model.token_vocab.encode(&problem.tokens);
        let mut tape = Tape::inference();
        let mut rng = SeededRng::new(0, 0);
        let (logits, _) = model.forward(&mut tape, &model.params, &ids, &mut rng)?;
        if let Some(class) =
            problem.gold_canonical().and_then(|c| model.template_vocab.class_of(c))
        {
            let ce = tape.cross_entropy(logits, class)?;
            total_ce += tape.value(ce).item();
            counted += 1;
        }
        if model.predict_and_solve(problem).correct {
            correct += 1;
        }
    }
    let mean_ce = if counted == 0 { f64::INFINITY } else { total_ce / counted as f64 };
    Ok((mean_ce, correct as f64 / validation.len() as f64))
}

/// Central-difference check of the full training loss (including the
/// self-attention penalty path when present) on one example.
pub fn classifier_gradient_check(
    model: &mut ClassifierModel,
    token_ids: &[usize],
    class: usize,
) -> Result<f64, TrainError> {
    let ids: Vec<usize> = token_ids.to_vec();
    let seed = model.config.seed;
    let mut params = std::mem::take(&mut model.params);
    let result = gradient_check(&mut params, seed, |tape, set| {
        let mut rng = SeededRng::new(0, 0);
        model.example_loss(tape, set, &ids, class, &mut rng)
    });
    model.params = params;
    Ok(result?)
}
