//! LSTM cells and the bidirectional encoder, built from tape primitives so
//! gradients flow through `Tape::backward` with no dedicated reverse rules.

use super::param::{ParamId, ParamSet};
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::NeuralError;
use crate::rng::SeededRng;

/// Weights of one LSTM direction. The stacked gate layout is
/// `[input, forget, candidate, output]`, each block of `hidden` rows.
#[derive(Debug, Clone)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new(
        set: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut SeededRng,
    ) -> Self {
        let w_x = set.add_uniform(&format!("{prefix}.w_x"), vec![4 * hidden, input], scale, rng);
        let w_h = set.add_uniform(&format!("{prefix}.w_h"), vec![4 * hidden, hidden], scale, rng);
        let b = set.add_uniform(&format!("{prefix}.b"), vec![4 * hidden], scale, rng);
        Self { w_x, w_h, b, input, hidden }
    }

    pub fn bind(&self, tape: &mut Tape, set: &ParamSet) -> LstmBound {
        LstmBound {
            w_x: tape.param(set, self.w_x),
            w_h: tape.param(set, self.w_h),
            b: tape.param(set, self.b),
            hidden: self.hidden,
        }
    }
}

/// Per-forward-pass binding of LSTM weights onto a tape.
#[derive(Debug, Clone, Copy)]
pub struct LstmBound {
    w_x: NodeId,
    w_h: NodeId,
    b: NodeId,
    hidden: usize,
}

/// One step of the standard LSTM cell:
/// `i,f,o = sigmoid`, `g = tanh`, `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_step(
    tape: &mut Tape,
    p: &LstmBound,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId), NeuralError> {
    let h = p.hidden;
    let zx = tape.matmul(p.w_x, x)?;
    let zh = tape.matmul(p.w_h, h_prev)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add(z, p.b)?;
    let i_gate = tape.slice(z, 0, h)?;
    let f_gate = tape.slice(z, h, 2 * h)?;
    let g_raw = tape.slice(z, 2 * h, 3 * h)?;
    let o_gate = tape.slice(z, 3 * h, 4 * h)?;
    let i = tape.sigmoid(i_gate);
    let f = tape.sigmoid(f_gate);
    let g = tape.tanh(g_raw);
    let o = tape.sigmoid(o_gate);
    let fc = tape.mul(f, c_prev)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c);
    let h_out = tape.mul(o, tc)?;
    Ok((h_out, c))
}

/// Run one direction over a sequence of input vectors; returns the hidden
/// state at every step and the final cell state.
pub fn lstm_run(
    tape: &mut Tape,
    p: &LstmBound,
    inputs: &[NodeId],
) -> Result<(Vec<NodeId>, NodeId), NeuralError> {
    if inputs.is_empty() {
        return Err(NeuralError::EmptySequence);
    }
    let mut h = tape.constant(Tensor::zeros(vec![p.hidden]));
    let mut c = tape.constant(Tensor::zeros(vec![p.hidden]));
    let mut states = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let (nh, nc) = lstm_step(tape, p, x, h, c)?;
        h = nh;
        c = nc;
        states.push(h);
    }
    Ok((states, c))
}

/// Output of the bidirectional encoder.
pub struct BiLstmStates {
    /// Per-step concatenated states, one node per step (each `2*hidden`).
    pub steps: Vec<NodeId>,
    /// Matrix view of `steps`: `(T, 2*hidden)`.
    pub matrix: NodeId,
    /// Concatenation of the forward pass's last state and the backward
    /// pass's last state.
    pub final_state: NodeId,
}

/// Encode a sequence of input vectors with forward and backward LSTM passes.
pub fn bilstm_encode(
    tape: &mut Tape,
    fwd: &LstmBound,
    bwd: &LstmBound,
    inputs: &[NodeId],
) -> Result<BiLstmStates, NeuralError> {
    if inputs.is_empty() {
        return Err(NeuralError::EmptySequence);
    }
    let (fwd_states, _) = lstm_run(tape, fwd, inputs)?;
    let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
    let (mut bwd_states, _) = lstm_run(tape, bwd, &reversed)?;
    bwd_states.reverse(); // index by original position

    let n = inputs.len();
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        steps.push(tape.concat(&[fwd_states[t], bwd_states[t]])?);
    }
    let matrix = tape.stack_rows(&steps)?;
    let final_state = tape.concat(&[fwd_states[n - 1], bwd_states[0]])?;
    Ok(BiLstmStates { steps, matrix, final_state })
}
