//! Named parameters with gradient storage.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NeuralError;
use crate::rng::SeededRng;

/// Half-range of the default uniform initialization.
pub const DEFAULT_INIT_SCALE: f64 = 0.08;

/// Index of a parameter within its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// All parameters of one model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter initialized uniformly in `(-scale, scale)`.
    /// The standard small-model scale is [`DEFAULT_INIT_SCALE`].
    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        scale: f64,
        rng: &mut SeededRng,
    ) -> ParamId {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.uniform_range(-scale, scale)).collect();
        self.add_tensor(name, Tensor::new(shape, data))
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> ParamId {
        self.add_tensor(name, Tensor::zeros(shape))
    }

    pub fn add_tensor(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let grad = Tensor::zeros(value.shape().to_vec());
        self.params.push(Parameter { name: name.to_string(), value, grad });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = Tensor::zeros(p.value.shape().to_vec());
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g *= factor;
            }
        }
    }

    /// Global L2 norm across every gradient element.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.data())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Clip the global gradient norm to `clip`, then apply one SGD update
    /// `value <- value - lr * grad`. Fails on any non-finite gradient.
    pub fn clip_and_step(&mut self, lr: f64, clip: f64) -> Result<f64, NeuralError> {
        for p in &self.params {
            if !p.grad.is_finite() {
                return Err(NeuralError::NonFiniteGradient { param: p.name.clone() });
            }
        }
        let norm = self.grad_norm();
        let factor = if norm > clip { clip / norm } else { 1.0 };
        for p in &mut self.params {
            let grad = p.grad.data().to_vec();
            for (v, g) in p.value.data_mut().iter_mut().zip(grad) {
                *v -= lr * factor * g;
            }
        }
        Ok(norm)
    }

    /// Total number of scalar values across all parameters.
    pub fn value_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Multiply every parameter value by `factor`. Gradient-check fixtures
    /// use this to lift gradients above the finite-difference noise floor.
    pub fn rescale_values(&mut self, factor: f64) {
        for p in &mut self.params {
            for v in p.value.data_mut() {
                *v *= factor;
            }
        }
    }
}
