//! Learned significant-number tagger: a bidirectional recurrent binary
//! classifier over the token context of each mention, trained on labels
//! derived by aligning gold equation constants to mention values.

use serde::{Deserialize, Serialize};

use crate::equation::parse_equation_set;
use crate::neural::{
    bilstm_encode, bucketed_batches, sgd_epoch, LstmParams, NeuralError, ParamId, ParamSet, Tape,
};
use crate::rng::SeededRng;
use crate::training::streams;
use crate::vocab::TokenVocab;

use super::numbers::detect_numbers;
use super::tokenize::tokenize_with_spans;
use super::{NumberMention, RawProblem, TextError};

pub const MIN_LABELED_MENTIONS: usize = 50;
const SIGNIFICANT_CLASS: usize = 0;
const INSIGNIFICANT_CLASS: usize = 1;

#[derive(Debug, thiserror::Error)]
pub enum TaggerError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SniTaggerConfig {
    /// Context tokens kept on each side of the mention.
    pub window: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for SniTaggerConfig {
    fn default() -> Self {
        Self {
            window: 4,
            embedding_dim: 16,
            hidden_dim: 16,
            init_scale: crate::neural::DEFAULT_INIT_SCALE,
            epochs: 40,
            batch_size: 8,
            learning_rate: 0.5,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

pub struct SniTagger {
    pub config: SniTaggerConfig,
    pub vocab: TokenVocab,
    pub params: ParamSet,
    embedding: ParamId,
    fwd: LstmParams,
    bwd: LstmParams,
    output: ParamId,
}

/// Digits are masked so the tagger generalizes over values while keeping the
/// surface pattern: `$20` -> `$##`, `2nd` -> `#nd`.
pub fn mask_digits(token: &str) -> String {
    token.chars().map(|c| if c.is_ascii_digit() { '#' } else { c }).collect()
}

fn context_window(tokens: &[String], index: usize, window: usize) -> Vec<String> {
    let start = index.saturating_sub(window);
    let end = (index + window + 1).min(tokens.len());
    tokens[start..end].iter().map(|t| mask_digits(t)).collect()
}

/// Alignment-derived labels: a mention is significant iff its value appears
/// among the gold equation constants. Problems whose equations fail to parse
/// yield no labels.
pub fn derive_labels(problems: &[RawProblem]) -> Vec<(Vec<String>, Vec<(NumberMention, bool)>)> {
    let mut out = Vec::new();
    for raw in problems {
        let Ok(spanned) = tokenize_with_spans(&raw.text) else { continue };
        let Ok(ast) = parse_equation_set(&raw.gold_equations) else { continue };
        let constants = ast.literal_values();
        let tokens: Vec<String> = spanned.iter().map(|t| t.text.clone()).collect();
        let mentions = detect_numbers(&spanned);
        let labeled: Vec<(NumberMention, bool)> =
            mentions.into_iter().map(|m| (m.clone(), constants.contains(&m.value))).collect();
        if !labeled.is_empty() {
            out.push((tokens, labeled));
        }
    }
    out
}

/// Train the tagger on alignment-derived labels. Fails with
/// `InsufficientLabels` below [`MIN_LABELED_MENTIONS`].
pub fn train_sni_tagger(
    problems: &[RawProblem],
    config: SniTaggerConfig,
) -> Result<SniTagger, TaggerError> {
    let labeled = derive_labels(problems);
    let examples: Vec<(Vec<String>, bool)> = labeled
        .iter()
        .flat_map(|(tokens, mentions)| {
            mentions.iter().map(|(m, label)| {
                (context_window(tokens, m.token_index, config.window), *label)
            })
        })
        .collect();
    if examples.len() < MIN_LABELED_MENTIONS {
        return Err(TextError::InsufficientLabels {
            found: examples.len(),
            required: MIN_LABELED_MENTIONS,
        }
        .into());
    }

    let vocab = TokenVocab::build(examples.iter().map(|(w, _)| w.as_slice()), 1);
    let mut rng = SeededRng::new(config.seed, streams::INIT);
    let mut params = ParamSet::new();
    let scale = config.init_scale;
    let (e, h) = (config.embedding_dim, config.hidden_dim);
    let embedding = params.add_uniform("embedding", vec![vocab.len(), e], scale, &mut rng);
    let fwd = LstmParams::new(&mut params, "fwd", e, h, scale, &mut rng);
    let bwd = LstmParams::new(&mut params, "bwd", e, h, scale, &mut rng);
    let output = params.add_uniform("output", vec![2, 2 * h], scale, &mut rng);
    let mut tagger =
        SniTagger { config: config.clone(), vocab, params, embedding, fwd, bwd, output };

    let encoded: Vec<(Vec<usize>, usize)> = examples
        .iter()
        .map(|(w, label)| {
            let class = if *label { SIGNIFICANT_CLASS } else { INSIGNIFICANT_CLASS };
            (tagger.vocab.encode(w), class)
        })
        .collect();
    let lengths: Vec<usize> = encoded.iter().map(|(ids, _)| ids.len()).collect();

    for epoch in 1..=config.epochs {
        let mut batch_rng = SeededRng::new(config.seed, streams::BATCHES ^ epoch as u64);
        let batches = bucketed_batches(&lengths, config.batch_size, &mut batch_rng);
        let mut params = std::mem::take(&mut tagger.params);
        let result =
            sgd_epoch(&mut params, &batches, config.learning_rate, config.grad_clip, |set, idx| {
                let (ids, class) = &encoded[idx];
                let mut tape = Tape::training();
                let logits = tagger.logits(&mut tape, set, ids)?;
                let loss = tape.cross_entropy(logits, *class)?;
                let grads = tape.backward(loss);
                tape.apply_gradients(&grads, set);
                Ok(tape.value(loss).item())
            });
        tagger.params = params;
        result?;
    }
    Ok(tagger)
}

impl SniTagger {
    fn logits(
        &self,
        tape: &mut Tape,
        set: &ParamSet,
        ids: &[usize],
    ) -> Result<crate::neural::NodeId, NeuralError> {
        let embedding = tape.param(set, self.embedding);
        let inputs = tape.embedding_lookup(embedding, ids)?;
        let fwd = self.fwd.bind(tape, set);
        let bwd = self.bwd.bind(tape, set);
        let states = bilstm_encode(tape, &fwd, &bwd, &inputs)?;
        let output = tape.param(set, self.output);
        tape.matmul(output, states.final_state)
    }

    /// Probability that the mention at `token_index` is significant.
    pub fn significance(&self, tokens: &[String], token_index: usize) -> f64 {
        let window = context_window(tokens, token_index, self.config.window);
        let ids = self.vocab.encode(&window);
        let mut tape = Tape::inference();
        let logits = self.logits(&mut tape, &self.params, &ids).expect("non-empty window");
        let probs = tape.softmax(logits);
        tape.value(probs).data()[SIGNIFICANT_CLASS]
    }

    /// Flag each mention significant iff its probability clears 0.5.
    pub fn apply(&self, mentions: &mut [NumberMention], tokens: &[String]) {
        for mention in mentions.iter_mut() {
            mention.significant = self.significance(tokens, mention.token_index) >= 0.5;
        }
    }

    /// Per-mention accuracy against alignment-derived labels.
    pub fn accuracy(&self, problems: &[RawProblem]) -> f64 {
        let labeled = derive_labels(problems);
        let mut correct = 0usize;
        let mut total = 0usize;
        for (tokens, mentions) in &labeled {
            for (mention, label) in mentions {
                let predicted = self.significance(tokens, mention.token_index) >= 0.5;
                if predicted == *label {
                    correct += 1;
                }
                total += 1;
            }
        }
        if total == 0 {
            return 0.0;
        }
        correct as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    /// Only dollar amounts enter the equation; bare counts do not.
    fn money_fixture(n: usize) -> Vec<RawProblem> {
        (0..n)
            .map(|i| {
                let a = 11 + (i % 7) as i64;
                let b = 31 + (i % 5) as i64;
                let k = 2 + (i % 3) as i64;
                let m = 6 + (i % 4) as i64;
                RawProblem {
                    id: format!("m{i}"),
                    text: format!(
                        "Jo paid ${a} for {k} books and ${b} for {m} pens. How much did Jo spend?"
                    ),
                    gold_equations: format!("{a} + {b} = x"),
                    gold_answers: vec![rat(a + b)],
                }
            })
            .collect()
    }

    #[test]
    fn digit_masking_keeps_surface_patterns() {
        assert_eq!(mask_digits("$20"), "$##");
        assert_eq!(mask_digits("2nd"), "#nd");
        assert_eq!(mask_digits("3/4"), "#/#");
        assert_eq!(mask_digits("books"), "books");
    }

    #[test]
    fn labels_follow_equation_constants() {
        let problems = money_fixture(1);
        let labeled = derive_labels(&problems);
        assert_eq!(labeled.len(), 1);
        let flags: Vec<bool> = labeled[0].1.iter().map(|(_, l)| *l).collect();
        // $11, 2, $31, 6 -> significant, not, significant, not.
        assert_eq!(flags, vec![true, false, true, false]);
    }

    #[test]
    fn insufficient_labels_is_an_error() {
        let problems = money_fixture(3); // 12 labeled mentions
        match train_sni_tagger(&problems, SniTaggerConfig::default()) {
            Err(TaggerError::Text(TextError::InsufficientLabels { found, required })) => {
                assert_eq!(found, 12);
                assert_eq!(required, MIN_LABELED_MENTIONS);
            }
            other => panic!("expected InsufficientLabels, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn learns_the_dollar_pattern() {
        let train = money_fixture(20); // 80 labeled mentions
        let tagger = train_sni_tagger(&train, SniTaggerConfig::default()).unwrap();
        // Held-out copies of the same pattern with fresh values.
        let held_out: Vec<RawProblem> = (0..5)
            .map(|i| {
                let a = 50 + i as i64;
                let b = 70 + i as i64;
                RawProblem {
                    id: format!("h{i}"),
                    text: format!(
                        "Al paid ${a} for {} books and ${b} for {} pens. How much did Al spend?",
                        4 + i,
                        7 + i
                    ),
                    gold_equations: format!("{a} + {b} = x"),
                    gold_answers: vec![rat(a + b)],
                }
            })
            .collect();
        assert_eq!(tagger.accuracy(&held_out), 1.0);
    }

    #[test]
    fn all_significant_corpus_predicts_all_significant() {
        let train: Vec<RawProblem> = (0..20)
            .map(|i| {
                let a = 2 + (i % 9) as i64;
                let b = 12 + (i % 6) as i64;
                let c = 3 + (i % 4) as i64;
                RawProblem {
                    id: format!("p{i}"),
                    text: format!("Sam had {a} rocks, found {b} shells and {c} leaves. Total?"),
                    gold_equations: format!("{a} + {b} + {c} = x"),
                    gold_answers: vec![rat(a + b + c)],
                }
            })
            .collect();
        let tagger = train_sni_tagger(&train, SniTaggerConfig::default()).unwrap();
        assert_eq!(tagger.accuracy(&train), 1.0);
        // Integration with the pipeline surface.
        let spanned = tokenize_with_spans(&train[0].text).unwrap();
        let tokens: Vec<String> = spanned.iter().map(|t| t.text.clone()).collect();
        let mut mentions = detect_numbers(&spanned);
        tagger.apply(&mut mentions, &tokens);
        assert!(mentions.iter().all(|m| m.significant));
    }
}
