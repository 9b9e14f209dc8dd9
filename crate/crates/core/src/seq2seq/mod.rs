//! Attention encoder-decoder over template token sequences.
//!
//! A unidirectional LSTM encodes the abstracted problem text; an LSTM
//! decoder emits template tokens one at a time, attending over the encoder
//! states with a bilinear score `score(h_t, s_i) = h_tᵀ W_a s_i`. Unlike the
//! closed-class solvers, decoding can produce templates never seen in
//! training.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::equation::EquationTemplate;
use crate::eval::{evaluate_template, FailureReason, SolveOutcome};
use crate::neural::{
    bucketed_batches, gradient_check, lstm_run, sgd_epoch, LstmBound, LstmParams, NeuralError,
    NodeId, OptimizerState, ParamId, ParamSet, Tape, Tensor,
};
use crate::rng::SeededRng;
use crate::text::AbstractedProblem;
use crate::training::{
    perplexity, streams, BestCheckpoint, DropoutPlacement, EpochLog, TrainError, TrainingLog,
};
use crate::vocab::{hash_lines, TokenVocab};

pub const UNK_ID: usize = 0;
pub const SOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
const RESERVED: [&str; 3] = ["<unk>", "<s>", "</s>"];

/// Template-symbol vocabulary: slot ids, operators, parentheses, '=', ';',
/// unknowns, and retained literal constants observed in training, plus the
/// reserved UNK/SOS/EOS ids.
#[derive(Debug, Clone)]
pub struct TargetVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TargetVocab {
    pub fn build<'a>(canonicals: impl Iterator<Item = &'a str>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for canonical in canonicals {
            for tok in canonical.split_whitespace() {
                if !index.contains_key(tok) {
                    index.insert(tok.to_string(), tokens.len());
                    tokens.push(tok.to_string());
                }
            }
        }
        Self { tokens, index }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        assert!(tokens.len() >= RESERVED.len());
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn hash(&self) -> String {
        hash_lines(&self.tokens)
    }

    pub fn encode(&self, canonical: &str) -> Vec<usize> {
        canonical.split_whitespace().map(|t| self.id(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub dropout_placement: DropoutPlacement,
    /// Half-range of the uniform parameter initialization.
    pub init_scale: f64,
    pub unk_min_freq: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub grad_clip: f64,
    pub length_cap: usize,
    pub seed: u64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 128,
            hidden_dim: 256,
            dropout: 0.3,
            dropout_placement: DropoutPlacement::default(),
            init_scale: crate::neural::DEFAULT_INIT_SCALE,
            unk_min_freq: 2,
            epochs: 100,
            batch_size: 32,
            initial_lr: 1.0,
            grad_clip: 5.0,
            length_cap: 50,
            seed: 0,
        }
    }
}

impl Seq2SeqConfig {
    /// The configuration named in the experimental setup: 500-dimensional
    /// hidden states and embeddings, dropout 0.3.
    pub fn paper_faithful() -> Self {
        Self { embedding_dim: 500, hidden_dim: 500, ..Self::default() }
    }
}

struct Seq2SeqIds {
    src_embedding: ParamId,
    encoder: LstmParams,
    tgt_embedding: ParamId,
    decoder: LstmParams,
    attn_score: ParamId,   // W_a: (hidden, hidden)
    attn_combine: ParamId, // W_c: (hidden, 2*hidden)
    output: ParamId,       // (V_tgt, hidden)
}

pub struct Seq2SeqModel {
    pub config: Seq2SeqConfig,
    pub source_vocab: TokenVocab,
    pub target_vocab: TargetVocab,
    pub params: ParamSet,
    ids: Seq2SeqIds,
}

struct DecoderBound {
    tgt_embedding: NodeId,
    decoder: LstmBound,
    attn_score: NodeId,
    attn_combine: NodeId,
    output: NodeId,
}

struct DecodeState {
    h: NodeId,
    c: NodeId,
}

impl Seq2SeqModel {
    pub fn init(config: Seq2SeqConfig, source_vocab: TokenVocab, target_vocab: TargetVocab) -> Self {
        let mut rng = SeededRng::new(config.seed, streams::INIT);
        let mut params = ParamSet::new();
        let scale = config.init_scale;
        let (e, h) = (config.embedding_dim, config.hidden_dim);
        let src_embedding =
            params.add_uniform("source.embedding", vec![source_vocab.len(), e], scale, &mut rng);
        let encoder = LstmParams::new(&mut params, "encoder", e, h, scale, &mut rng);
        let tgt_embedding =
            params.add_uniform("target.embedding", vec![target_vocab.len(), e], scale, &mut rng);
        let decoder = LstmParams::new(&mut params, "decoder", e, h, scale, &mut rng);
        let attn_score = params.add_uniform("attention.score", vec![h, h], scale, &mut rng);
        let attn_combine = params.add_uniform("attention.combine", vec![h, 2 * h], scale, &mut rng);
        let output = params.add_uniform("output", vec![target_vocab.len(), h], scale, &mut rng);
        let ids = Seq2SeqIds {
            src_embedding,
            encoder,
            tgt_embedding,
            decoder,
            attn_score,
            attn_combine,
            output,
        };
        Self { config, source_vocab, target_vocab, params, ids }
    }

    /// One encoder state per source token, as a `(T, hidden)` matrix, plus
    /// the encoder's final hidden and cell states.
    fn encode(
        &self,
        tape: &mut Tape,
        set: &ParamSet,
        source_ids: &[usize],
        rng: &mut SeededRng,
    ) -> Result<(NodeId, DecodeState), NeuralError> {
        if source_ids.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let embedding = tape.param(set, self.ids.src_embedding);
        let inputs = tape.embedding_lookup(embedding, source_ids)?;
        let bound = self.ids.encoder.bind(tape, set);
        let (states, final_cell) = lstm_run(tape, &bound, &inputs)?;
        let final_hidden = *states.last().expect("non-empty sequence");
        let mut matrix = tape.stack_rows(&states)?;
        if self.config.dropout_placement.on_encoder() {
            matrix = tape.dropout(matrix, self.config.dropout, rng)?;
        }
        Ok((matrix, DecodeState { h: final_hidden, c: final_cell }))
    }

    fn bind_decoder(&self, tape: &mut Tape, set: &ParamSet) -> DecoderBound {
        DecoderBound {
            tgt_embedding: tape.param(set, self.ids.tgt_embedding),
            decoder: self.ids.decoder.bind(tape, set),
            attn_score: tape.param(set, self.ids.attn_score),
            attn_combine: tape.param(set, self.ids.attn_combine),
            output: tape.param(set, self.ids.output),
        }
    }

    /// One decoder step with global attention: bilinear scores over encoder
    /// states, context, and `h~ = tanh(W_c [context; h])` projected to the
    /// target vocabulary. Returns logits, the attention weights, and the
    /// updated state.
    fn decode_step(
        &self,
        tape: &mut Tape,
        bound: &DecoderBound,
        state: DecodeState,
        prev_token: usize,
        enc_matrix: NodeId,
        rng: &mut SeededRng,
    ) -> Result<(NodeId, NodeId, DecodeState), NeuralError> {
        let x = tape.row(bound.tgt_embedding, prev_token)?;
        let (h, c) = crate::neural::lstm_step(tape, &bound.decoder, x, state.h, state.c)?;
        let projected = tape.matmul(bound.attn_score, h)?;
        let scores = tape.matmul(enc_matrix, projected)?;
        let weights = tape.softmax(scores);
        let enc_t = tape.transpose(enc_matrix)?;
        let context = tape.matmul(enc_t, weights)?;
        let merged = tape.concat(&[context, h])?;
        let combined = tape.matmul(bound.attn_combine, merged)?;
        let mut attentional = tape.tanh(combined);
        if self.config.dropout_placement.on_classifier_input() {
            attentional = tape.dropout(attentional, self.config.dropout, rng)?;
        }
        let logits = tape.matmul(bound.output, attentional)?;
        Ok((logits, weights, DecodeState { h, c }))
    }

    /// Teacher-forced sequence loss: the sum of per-step cross entropies of
    /// `[SOS, y..] -> [y.., EOS]`. Returns the loss node and the number of
    /// predicted tokens.
    fn sequence_loss(
        &self,
        tape: &mut Tape,
        set: &ParamSet,
        source_ids: &[usize],
        target_ids: &[usize],
        rng: &mut SeededRng,
    ) -> Result<(NodeId, usize), NeuralError> {
        let (enc_matrix, mut state) = self.encode(tape, set, source_ids, rng)?;
        let bound = self.bind_decoder(tape, set);
        let mut inputs = vec![SOS_ID];
        inputs.extend_from_slice(target_ids);
        let mut expected = target_ids.to_vec();
        expected.push(EOS_ID);

        let mut total: Option<NodeId> = None;
        for (prev, want) in inputs.iter().zip(&expected) {
            let (logits, _, next) = self.decode_step(tape, &bound, state, *prev, enc_matrix, rng)?;
            state = next;
            let ce = tape.cross_entropy(logits, *want)?;
            total = Some(match total {
                Some(t) => tape.add(t, ce)?,
                None => ce,
            });
        }
        Ok((total.expect("target sequences are non-empty"), expected.len()))
    }

    /// Greedy argmax decoding until EOS or the length cap.
    pub fn greedy_decode(&self, source_tokens: &[String]) -> Result<DecodeResult, NeuralError> {
        let source_ids = self.source_vocab.encode(source_tokens);
        let mut tape = Tape::inference();
        let mut rng = SeededRng::new(0, 0);
        let (enc_matrix, mut state) = self.encode(&mut tape, &self.params, &source_ids, &mut rng)?;
        let bound = self.bind_decoder(&mut tape, &self.params);

        let mut prev = SOS_ID;
        let mut token_ids = Vec::new();
        let mut attention = Vec::new();
        let mut terminated = false;
        for _ in 0..self.config.length_cap {
            let (logits, weights, next) =
                self.decode_step(&mut tape, &bound, state, prev, enc_matrix, &mut rng)?;
            state = next;
            attention.push(tape.value(weights).data().to_vec());
            let probs = tape.softmax(logits);
            let choice = crate::classifier::argmax(tape.value(probs).data());
            if choice == EOS_ID {
                terminated = true;
                break;
            }
            token_ids.push(choice);
            prev = choice;
        }
        let tokens = token_ids.iter().map(|&id| self.target_vocab.token(id).to_string()).collect();
        Ok(DecodeResult { token_ids, tokens, terminated, attention })
    }

    /// Decode, parse, instantiate, and solve. Parse failures, UNK emissions,
    /// missing slots, and non-termination are wrong outcomes with reasons.
    pub fn generate_and_solve(&self, problem: &AbstractedProblem) -> SolveOutcome {
        let decoded = match self.greedy_decode(&problem.tokens) {
            Ok(d) => d,
            Err(_) => return SolveOutcome::failed(&problem.id, None, FailureReason::Unparseable),
        };
        let rendered = decoded.tokens.join(" ");
        if !decoded.terminated {
            return SolveOutcome::failed(&problem.id, Some(rendered), FailureReason::NonTerminated);
        }
        if decoded.token_ids.contains(&UNK_ID) {
            return SolveOutcome::failed(&problem.id, Some(rendered), FailureReason::Unparseable);
        }
        match EquationTemplate::parse(&rendered) {
            Ok(template) => evaluate_template(problem, &template),
            Err(_) => SolveOutcome::failed(&problem.id, Some(rendered), FailureReason::Unparseable),
        }
    }
}

/// Output of greedy decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub token_ids: Vec<usize>,
    pub tokens: Vec<String>,
    pub terminated: bool,
    /// Attention distribution over source positions, one row per step.
    pub attention: Vec<Vec<f64>>,
}

/// Train the encoder-decoder with teacher forcing. The validation perplexity
/// (exp of the mean per-token cross entropy) drives the halving schedule;
/// the checkpoint with the best validation solution accuracy is kept.
pub fn train_seq2seq(
    config: Seq2SeqConfig,
    train: &[AbstractedProblem],
    validation: &[AbstractedProblem],
) -> Result<(Seq2SeqModel, TrainingLog), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if validation.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let source_vocab =
        TokenVocab::build(train.iter().map(|p| p.tokens.as_slice()), config.unk_min_freq);
    let target_vocab = TargetVocab::build(train.iter().filter_map(|p| p.gold_canonical()));
    if target_vocab.len() == RESERVED.len() {
        return Err(TrainError::EmptyVocab);
    }
    let mut model = Seq2SeqModel::init(config, source_vocab, target_vocab);
    let log = model.fit(train, validation)?;
    Ok((model, log))
}

impl Seq2SeqModel {
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
    model: &mut Seq2SeqModel,
    train: &[AbstractedProblem],
    validation: &[AbstractedProblem],
) -> Result<TrainingLog, TrainError> {
    let examples: Vec<(Vec<usize>, Vec<usize>)> = train
        .iter()
        .filter_map(|p| {
            let canonical = p.gold_canonical()?;
            Some((model.source_vocab.encode(&p.tokens), model.target_vocab.encode(canonical)))
        })
        .collect();
    if examples.is_empty() {
        return Err(TrainError::EmptyVocab);
    }
    let lengths: Vec<usize> = examples.iter().map(|(s, _)| s.len()).collect();
    let seed = model.config.seed;
    let clip = model.config.grad_clip;
    let batch_size = model.config.batch_size;
    let mut optimizer = OptimizerState::new(model.config.initial_lr);
    let mut best = BestCheckpoint::new();
    let mut log = TrainingLog::default();

    for epoch in 1..=model.config.epochs {
        let mut batch_rng = SeededRng::new(seed, streams::BATCHES ^ epoch as u64);
        let mut dropout_rng = SeededRng::new(seed, streams::DROPOUT ^ epoch as u64);
        let batches = bucketed_batches(&lengths, batch_size, &mut batch_rng);

        let mut params = std::mem::take(&mut model.params);
        let result =
            sgd_epoch(&mut params, &batches, optimizer.learning_rate, clip, |set, idx| {
                let (src, tgt) = &examples[idx];
                let mut tape = Tape::training();
                let (loss, _) = model.sequence_loss(&mut tape, set, src, tgt, &mut dropout_rng)?;
                let grads = tape.backward(loss);
                tape.apply_gradients(&grads, set);
                Ok(tape.value(loss).item())
            });
        model.params = params;
        let train_loss = result?;

        let (val_ppl, val_ce, accuracy) = validate(model, validation)?;
        optimizer.maybe_halve(epoch, val_ppl);
        best.offer(&model.params, epoch, accuracy);
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss: val_ce,
            val_perplexity: val_ppl,
            val_solution_accuracy: accuracy,
            learning_rate: optimizer.learning_rate,
        });
    }
    let (best_epoch, best_acc) = best.restore(&mut model.params);
    log.best_epoch = best_epoch;
    log.best_val_solution_accuracy = best_acc;
    Ok(log)
}

/// Validation perplexity (per-token), mean per-token CE, and solution
/// accuracy under greedy decoding.
fn validate(
    model: &Seq2SeqModel,
    validation: &[AbstractedProblem],
) -> Result<(f64, f64, f64), TrainError> {
    let mut total_ce = 0.0;
    let mut tokens = 0usize;
    let mut correct = 0usize;
    for problem in validation {
        if let Some(canonical) = problem.gold_canonical() {
            let src = model.source_vocab.encode(&problem.tokens);
            let tgt = model.target_vocab.encode(canonical);
            let mut tape = Tape::inference();
            let mut rng = SeededRng::new(0, 0);
            let (loss, count) =
                model.sequence_loss(&mut tape, &model.params, &src, &tgt, &mut rng)?;
            total_ce += tape.value(loss).item();
            tokens += count;
        }
        if model.generate_and_solve(problem).correct {
            correct += 1;
        }
    }
    let mean_ce = if tokens == 0 { f64::INFINITY } else { total_ce / tokens as f64 };
    Ok((perplexity(total_ce, tokens), mean_ce, correct as f64 / validation.len() as f64))
}

/// Central-difference check through the full teacher-forced loss, attention
/// included.
pub fn seq2seq_gradient_check(
    model: &mut Seq2SeqModel,
    source_ids: &[usize],
    target_ids: &[usize],
) -> Result<f64, TrainError> {
    let src = source_ids.to_vec();
    let tgt = target_ids.to_vec();
    let seed = model.config.seed;
    let mut params = std::mem::take(&mut model.params);
    let result = gradient_check(&mut params, seed, |tape, set| {
        let mut rng = SeededRng::new(0, 0);
        let (loss, _) = model.sequence_loss(tape, set, &src, &tgt, &mut rng)?;
        Ok(loss)
    });
    model.params = params;
    Ok(result?)
}
