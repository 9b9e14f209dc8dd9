//! Shared training-loop machinery: epoch logs, checkpoint-by-accuracy
//! selection, and stream labels for derived generators.

use serde::{Deserialize, Serialize};

use crate::neural::{NeuralError, ParamSet, Tensor};

/// Stream labels so each consumer of the experiment seed draws from an
/// independent generator.
pub mod streams {
    pub const INIT: u64 = 0x1217;
    pub const BATCHES: u64 = 0xBA7C;
    pub const DROPOUT: u64 = 0xD120;
}

/// Where dropout is applied; the encoder-output and head-input sites can be
/// toggled independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    EncoderOutput,
    ClassifierInput,
    #[default]
    Both,
    None,
}

impl DropoutPlacement {
    pub fn on_encoder(self) -> bool {
        matches!(self, DropoutPlacement::EncoderOutput | DropoutPlacement::Both)
    }

    pub fn on_classifier_input(self) -> bool {
        matches!(self, DropoutPlacement::ClassifierInput | DropoutPlacement::Both)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("training split produced an empty template vocabulary")]
    EmptyVocab,
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("embedding file dimension {file} does not match embedding_dim {config}")]
    EmbeddingDimMismatch { file: usize, config: usize },
    #[error("cannot load embedding file: {0}")]
    Embedding(#[from] crate::retrieval::EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_perplexity: f64,
    pub val_solution_accuracy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_solution_accuracy: f64,
}

/// Keeps the parameter values of the epoch with the best validation solution
/// accuracy (ties keep the earliest epoch).
pub struct BestCheckpoint {
    values: Option<Vec<Tensor>>,
    pub epoch: usize,
    pub accuracy: f64,
}

impl BestCheckpoint {
    pub fn new() -> Self {
        Self { values: None, epoch: 0, accuracy: f64::NEG_INFINITY }
    }

    pub fn offer(&mut self, set: &ParamSet, epoch: usize, accuracy: f64) {
        if accuracy > self.accuracy {
            self.accuracy = accuracy;
            self.epoch = epoch;
            self.values = Some(set.iter().map(|p| p.value.clone()).collect());
        }
    }

    pub fn restore(self, set: &mut ParamSet) -> (usize, f64) {
        if let Some(values) = self.values {
            for (id, value) in set.ids().zip(values) {
                set.get_mut(id).value = value;
            }
        }
        (self.epoch, self.accuracy.max(0.0))
    }
}

impl Default for BestCheckpoint {
    fn default() -> Self {
        Self::new()
    }
}

/// `exp(mean per-token cross entropy)`.
pub fn perplexity(total_cross_entropy: f64, token_count: usize) -> f64 {
    if token_count == 0 {
        return f64::INFINITY;
    }
    (total_cross_entropy / token_count as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_predictor_perplexity_equals_vocab_size() {
        // Each of n tokens costs ln(V) under a uniform distribution.
        let v = 37usize;
        let n = 11usize;
        let total = (v as f64).ln() * n as f64;
        assert!((perplexity(total, n) - v as f64).abs() < 1e-9);
    }

    #[test]
    fn best_checkpoint_keeps_earliest_on_ties() {
        let mut set = ParamSet::new();
        let w = set.add_tensor("w", Tensor::vector(vec![1.0]));
        let mut best = BestCheckpoint::new();
        best.offer(&set, 1, 0.5);
        set.get_mut(w).value = Tensor::vector(vec![2.0]);
        best.offer(&set, 2, 0.5); // tie: not taken
        set.get_mut(w).value = Tensor::vector(vec![3.0]);
        let (epoch, acc) = best.restore(&mut set);
        assert_eq!((epoch, acc), (1, 0.5));
        assert_eq!(set.get(w).value.data(), &[1.0]);
    }
}
