//! Reverse-mode differentiation over a recorded operation tape.
//!
//! A forward pass appends nodes in execution order; `backward` traverses in
//! exact reverse order, accumulating gradients. Parameters enter the tape as
//! leaves tagged with their [`ParamId`] so gradients can be routed back into
//! the owning [`ParamSet`].

use super::param::{ParamId, ParamSet};
use super::tensor::Tensor;
use super::NeuralError;
use crate::rng::SeededRng;

pub type NodeId = usize;

enum Op {
    Leaf(Option<ParamId>),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Row(NodeId, usize),
    Slice(NodeId, usize, usize),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Dropout(NodeId, Vec<f64>),
    CrossEntropy(NodeId, usize),
    SumAll(NodeId),
    Scale(NodeId, f64),
    Flatten(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    training: bool,
}

impl Tape {
    /// A tape in training mode: dropout is active.
    pub fn training() -> Self {
        Self { nodes: Vec::new(), training: true }
    }

    /// A tape in inference mode: dropout is the identity.
    pub fn inference() -> Self {
        Self { nodes: Vec::new(), training: false }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite forward value");
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf(None))
    }

    /// Bind a parameter's current value as a tape leaf.
    pub fn param(&mut self, set: &ParamSet, id: ParamId) -> NodeId {
        self.push(set.get(id).value.clone(), Op::Leaf(Some(id)))
    }

    fn binary_shape_check(&self, a: NodeId, b: NodeId, op: &str) -> Result<(), NeuralError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NeuralError::ShapeMismatch {
                op: op.into(),
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        self.binary_shape_check(a, b, "add")?;
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        self.binary_shape_check(a, b, "sub")?;
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        self.binary_shape_check(a, b, "mul")?;
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let ok = sa.len() == 2 && !sb.is_empty() && sb[0] == sa[1] && sb.len() <= 2;
        if !ok {
            return Err(NeuralError::ShapeMismatch {
                op: "matmul".into(),
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::Matmul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, NeuralError> {
        if self.value(a).shape().len() != 2 {
            return Err(NeuralError::ShapeMismatch {
                op: "transpose".into(),
                left: self.value(a).shape().to_vec(),
                right: vec![],
            });
        }
        let value = self.value(a).transposed();
        Ok(self.push(value, Op::Transpose(a)))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, NeuralError> {
        let mut data = Vec::new();
        for &p in parts {
            if self.value(p).shape().len() != 1 {
                return Err(NeuralError::ShapeMismatch {
                    op: "concat".into(),
                    left: self.value(p).shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Stack equal-length vectors into a matrix, one vector per row.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId, NeuralError> {
        if rows.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let cols = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if self.value(r).shape() != [cols] {
                return Err(NeuralError::ShapeMismatch {
                    op: "stack_rows".into(),
                    left: vec![cols],
                    right: self.value(r).shape().to_vec(),
                });
            }
            data.extend_from_slice(self.value(r).data());
        }
        Ok(self.push(Tensor::matrix(rows.len(), cols, data), Op::StackRows(rows.to_vec())))
    }

    pub fn row(&mut self, m: NodeId, index: usize) -> Result<NodeId, NeuralError> {
        let t = self.value(m);
        if t.shape().len() != 2 || index >= t.rows() {
            return Err(NeuralError::ShapeMismatch {
                op: "row".into(),
                left: t.shape().to_vec(),
                right: vec![index],
            });
        }
        let cols = t.cols();
        let value = Tensor::vector(t.data()[index * cols..(index + 1) * cols].to_vec());
        Ok(self.push(value, Op::Row(m, index)))
    }

    /// Rows of an embedding matrix for a token id sequence.
    pub fn embedding_lookup(
        &mut self,
        table: NodeId,
        ids: &[usize],
    ) -> Result<Vec<NodeId>, NeuralError> {
        ids.iter().map(|&i| self.row(table, i)).collect()
    }

    pub fn slice(&mut self, v: NodeId, start: usize, end: usize) -> Result<NodeId, NeuralError> {
        let t = self.value(v);
        if t.shape().len() != 1 || end > t.len() || start > end {
            return Err(NeuralError::ShapeMismatch {
                op: "slice".into(),
                left: t.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let value = Tensor::vector(t.data()[start..end].to_vec());
        Ok(self.push(value, Op::Slice(v, start, end)))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(value, Op::Sigmoid(a))
    }

    /// Softmax along the last axis (whole vector, or each matrix row).
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let value = match t.shape().len() {
            2 => {
                let (m, n) = (t.rows(), t.cols());
                let mut data = t.data().to_vec();
                for r in 0..m {
                    softmax_in_place(&mut data[r * n..(r + 1) * n]);
                }
                Tensor::matrix(m, n, data)
            }
            _ => {
                let mut data = t.data().to_vec();
                softmax_in_place(&mut data);
                Tensor::vector(data)
            }
        };
        self.push(value, Op::Softmax(a))
    }

    /// Inverted dropout: at train time each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; identity at
    /// inference time.
    pub fn dropout(
        &mut self,
        a: NodeId,
        p: f64,
        rng: &mut SeededRng,
    ) -> Result<NodeId, NeuralError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NeuralError::InvalidProbability(p));
        }
        if !self.training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> =
            (0..self.value(a).len()).map(|_| if rng.uniform() < p { 0.0 } else { keep }).collect();
        let t = self.value(a);
        let data: Vec<f64> = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data);
        Ok(self.push(value, Op::Dropout(a, mask)))
    }

    /// Numerically stable cross entropy of a logit vector against a target
    /// class: `logsumexp(logits) - logits[target]`.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, NeuralError> {
        let t = self.value(logits);
        if t.shape().len() != 1 || target >= t.len() {
            return Err(NeuralError::ShapeMismatch {
                op: "cross_entropy".into(),
                left: t.shape().to_vec(),
                right: vec![target],
            });
        }
        let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + t.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - t.data()[target];
        Ok(self.push(Tensor::scalar(loss.max(0.0)), Op::CrossEntropy(logits, target)))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::SumAll(a))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|v| v * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn flatten(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::vector(self.value(a).data().to_vec());
        self.push(value, Op::Flatten(a))
    }

    /// Reverse-mode sweep from `root` (a scalar). Returns one gradient per
    /// node, `None` where no gradient flows.
    pub fn backward(&mut self, root: NodeId) -> Vec<Option<Tensor>> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Tensor::scalar(1.0));
        for id in (0..=root).rev() {
            let Some(grad) = grads[id].take() else { continue };
            self.propagate(id, &grad, &mut grads);
            grads[id] = Some(grad);
        }
        grads
    }

    fn accumulate_grad(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id] {
            Some(g) => g.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&self, id: NodeId, grad: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = Self::accumulate_grad;
        match &self.nodes[id].op {
            Op::Leaf(_) => {}
            Op::Add(a, b) => {
                acc(grads, *a, grad.clone());
                acc(grads, *b, grad.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, grad.clone());
                acc(grads, *b, grad.map(|v| -v));
            }
            Op::Mul(a, b) => {
                acc(grads, *a, grad.zip(self.value(*b), |g, v| g * v));
                acc(grads, *b, grad.zip(self.value(*a), |g, v| g * v));
            }
            Op::Matmul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if vb.shape().len() == 1 {
                    // y = A x: dA = dy ⊗ x, dx = Aᵀ dy
                    acc(grads, *a, grad.outer(vb));
                    acc(grads, *b, va.transposed().matmul(grad));
                } else {
                    // C = A B: dA = dC Bᵀ, dB = Aᵀ dC
                    acc(grads, *a, grad.matmul(&vb.transposed()));
                    acc(grads, *b, va.transposed().matmul(grad));
                }
            }
            Op::Transpose(a) => acc(grads, *a, grad.transposed()),
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(grads, p, Tensor::vector(grad.data()[offset..offset + len].to_vec()));
                    offset += len;
                }
            }
            Op::StackRows(rows) => {
                let cols = self.value(rows[0]).len();
                for (r, &row) in rows.iter().enumerate() {
                    acc(grads, row, Tensor::vector(grad.data()[r * cols..(r + 1) * cols].to_vec()));
                }
            }
            Op::Row(m, index) => {
                let src = self.value(*m);
                let mut delta = Tensor::zeros(src.shape().to_vec());
                let cols = src.cols();
                delta.data_mut()[index * cols..(index + 1) * cols].copy_from_slice(grad.data());
                acc(grads, *m, delta);
            }
            Op::Slice(v, start, end) => {
                let src = self.value(*v);
                let mut delta = Tensor::zeros(src.shape().to_vec());
                delta.data_mut()[*start..*end].copy_from_slice(grad.data());
                acc(grads, *v, delta);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[id].value;
                acc(grads, *a, grad.zip(y, |g, y| g * (1.0 - y * y)));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[id].value;
                acc(grads, *a, grad.zip(y, |g, y| g * y * (1.0 - y)));
            }
            Op::Softmax(a) => {
                let y = &self.nodes[id].value;
                let delta = match y.shape().len() {
                    2 => {
                        let (m, n) = (y.rows(), y.cols());
                        let mut out = vec![0.0; m * n];
                        for r in 0..m {
                            let yr = &y.data()[r * n..(r + 1) * n];
                            let gr = &grad.data()[r * n..(r + 1) * n];
                            let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                            for c in 0..n {
                                out[r * n + c] = yr[c] * (gr[c] - dot);
                            }
                        }
                        Tensor::matrix(m, n, out)
                    }
                    _ => {
                        let dot: f64 =
                            y.data().iter().zip(grad.data()).map(|(y, g)| y * g).sum();
                        y.zip(grad, |y, g| y * (g - dot))
                    }
                };
                acc(grads, *a, delta);
            }
            Op::Dropout(a, mask) => {
                let data: Vec<f64> =
                    grad.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                acc(grads, *a, Tensor::new(self.value(*a).shape().to_vec(), data));
            }
            Op::CrossEntropy(logits, target) => {
                let t = self.value(*logits);
                let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = t.data().iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let g = grad.item();
                let mut delta: Vec<f64> = exps.iter().map(|e| g * e / sum).collect();
                delta[*target] -= g;
                acc(grads, *logits, Tensor::vector(delta));
            }
            Op::SumAll(a) => {
                let g = grad.item();
                let src = self.value(*a);
                acc(grads, *a, Tensor::new(src.shape().to_vec(), vec![g; src.len()]));
            }
            Op::Scale(a, factor) => acc(grads, *a, grad.map(|v| v * factor)),
            Op::Flatten(a) => {
                let src = self.value(*a);
                acc(grads, *a, Tensor::new(src.shape().to_vec(), grad.data().to_vec()));
            }
        }
    }

    /// Route leaf gradients into the owning parameters (accumulating).
    pub fn apply_gradients(&self, grads: &[Option<Tensor>], set: &mut ParamSet) {
        for (node, grad) in self.nodes.iter().zip(grads) {
            if let (Op::Leaf(Some(id)), Some(grad)) = (&node.op, grad) {
                set.get_mut(*id).grad.add_assign(grad);
            }
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
