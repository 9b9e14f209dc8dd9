//! Minimal dense-tensor engine with reverse-mode differentiation, recurrent
//! layers, and the SGD/halving optimizer, verified against finite
//! differences.

mod gradcheck;
mod lstm;
mod param;
mod tape;
mod tensor;

pub mod optim;

pub use gradcheck::{gradient_check, GRADCHECK_EPSILON, GRADCHECK_SAMPLES_PER_PARAM};
pub use lstm::{bilstm_encode, lstm_run, lstm_step, BiLstmStates, LstmBound, LstmParams};
pub use optim::{bucketed_batches, sgd_epoch, OptimizerState};
pub use param::{ParamId, ParamSet, Parameter, DEFAULT_INIT_SCALE};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: String, left: Vec<usize>, right: Vec<usize> },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("non-finite gradient in parameter {param}")]
    NonFiniteGradient { param: String },
}
