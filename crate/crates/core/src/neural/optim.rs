//! SGD with gradient-norm clipping and the perplexity-driven halving
//! schedule: the learning rate starts at 1.0 and is halved whenever the
//! validation perplexity fails to decrease from one epoch to the next.

use serde::{Deserialize, Serialize};

use super::param::ParamSet;
use super::NeuralError;

pub const DEFAULT_INITIAL_LR: f64 = 1.0;
pub const DEFAULT_GRAD_CLIP: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub initial_lr: f64,
    pub learning_rate: f64,
    /// Validation perplexity of the previous epoch; the halving trigger.
    pub prev_val_perplexity: f64,
    /// Epoch indices at which the learning rate was halved.
    pub halvings: Vec<usize>,
}

impl OptimizerState {
    pub fn new(initial_lr: f64) -> Self {
        assert!(initial_lr > 0.0);
        Self {
            initial_lr,
            learning_rate: initial_lr,
            prev_val_perplexity: f64::INFINITY,
            halvings: Vec::new(),
        }
    }

    /// Record the epoch's validation perplexity; halve the learning rate iff
    /// it did not decrease relative to the previous epoch.
    pub fn maybe_halve(&mut self, epoch: usize, val_perplexity: f64) {
        if val_perplexity >= self.prev_val_perplexity {
            self.learning_rate /= 2.0;
            self.halvings.push(epoch);
        }
        self.prev_val_perplexity = val_perplexity;
        debug_assert!(
            (self.learning_rate - self.initial_lr * 0.5f64.powi(self.halvings.len() as i32)).abs()
                < 1e-15
        );
    }
}

/// One SGD epoch over pre-built batches of example indices. `example_loss`
/// runs forward + backward for one example, accumulating gradients into the
/// set, and returns the example's loss. Batch gradients are averaged, the
/// global norm is clipped, and one update is applied per batch.
///
/// Returns the mean example loss across the epoch.
pub fn sgd_epoch(
    set: &mut ParamSet,
    batches: &[Vec<usize>],
    learning_rate: f64,
    clip: f64,
    mut example_loss: impl FnMut(&mut ParamSet, usize) -> Result<f64, NeuralError>,
) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for batch in batches {
        if batch.is_empty() {
            continue;
        }
        set.zero_grads();
        for &idx in batch {
            total += example_loss(set, idx)?;
            count += 1;
        }
        set.scale_grads(1.0 / batch.len() as f64);
        set.clip_and_step(learning_rate, clip)?;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Deterministic epoch batching: shuffle example order with the epoch's rng,
/// stable-sort by sequence length into buckets, chunk, then shuffle the
/// batch order. Examples are still processed one at a time (no padding).
pub fn bucketed_batches(
    lengths: &[usize],
    batch_size: usize,
    rng: &mut crate::rng::SeededRng,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    rng.shuffle(&mut order);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> =
        order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect();
    rng.shuffle(&mut batches);
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;
    use crate::rng::SeededRng;

    #[test]
    fn halving_schedule_follows_the_previous_epoch_rule() {
        let mut state = OptimizerState::new(1.0);
        let mut lrs = Vec::new();
        for (epoch, ppl) in [10.0, 9.0, 9.5, 9.4].iter().enumerate() {
            state.maybe_halve(epoch + 1, *ppl);
            lrs.push(state.learning_rate);
        }
        assert_eq!(lrs, vec![1.0, 1.0, 0.5, 0.5]);
        assert_eq!(state.halvings, vec![3]);
    }

    #[test]
    fn halves_only_after_epoch_three_on_shorter_trace() {
        let mut state = OptimizerState::new(1.0);
        let mut lrs = Vec::new();
        for (epoch, ppl) in [10.0, 9.0, 9.5].iter().enumerate() {
            state.maybe_halve(epoch + 1, *ppl);
            lrs.push(state.learning_rate);
        }
        assert_eq!(lrs, vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn single_step_updates_weight() {
        let mut set = ParamSet::new();
        let w = set.add_tensor("w", Tensor::vector(vec![1.0]));
        set.get_mut(w).grad = Tensor::vector(vec![0.5]);
        set.clip_and_step(1.0, 5.0).unwrap();
        assert_eq!(set.get(w).value.data(), &[0.5]);
    }

    #[test]
    fn norm_clipping_scales_the_gradient() {
        let mut set = ParamSet::new();
        let w = set.add_tensor("w", Tensor::vector(vec![0.0]));
        set.get_mut(w).grad = Tensor::vector(vec![50.0]);
        let norm = set.clip_and_step(1.0, 5.0).unwrap();
        assert_eq!(norm, 50.0);
        // Effective gradient 50 * (5/50) = 5.
        assert_eq!(set.get(w).value.data(), &[-5.0]);
    }

    #[test]
    fn non_finite_gradients_abort_with_the_parameter_name() {
        let mut set = ParamSet::new();
        let w = set.add_tensor("bad.w", Tensor::vector(vec![0.0]));
        set.get_mut(w).grad = Tensor::vector(vec![f64::NAN]);
        match set.clip_and_step(1.0, 5.0) {
            Err(NeuralError::NonFiniteGradient { param }) => assert_eq!(param, "bad.w"),
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
    }

    #[test]
    fn bucketing_is_deterministic_and_complete() {
        let lengths = vec![5, 2, 9, 2, 7, 1, 4, 4];
        let a = bucketed_batches(&lengths, 3, &mut SeededRng::new(3, 9));
        let b = bucketed_batches(&lengths, 3, &mut SeededRng::new(3, 9));
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..lengths.len()).collect::<Vec<_>>());
    }
}
