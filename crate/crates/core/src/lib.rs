//! Data-driven solvers for algebra word problems.
//!
//! The toolkit maps problem texts to equation templates (equations with the
//! numbers abstracted into ordered slots), predicts templates with retrieval,
//! classification, or sequence-generation models, and evaluates solution
//! accuracy against gold answers.

pub mod equation;
pub mod checkpoint;
pub mod classifier;
pub mod eval;
pub mod neural;
pub mod rational;
pub mod retrieval;
pub mod rng;
pub mod seq2seq;
pub mod text;
pub mod training;
pub mod vocab;
