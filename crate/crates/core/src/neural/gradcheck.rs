//! Central-difference verification of analytic gradients.

use super::param::ParamSet;
use super::tape::{NodeId, Tape};
use super::NeuralError;
use crate::rng::SeededRng;

pub const GRADCHECK_EPSILON: f64 = 1e-5;
/// Parameters larger than this are spot-checked on a random subsample.
pub const GRADCHECK_SAMPLES_PER_PARAM: usize = 200;

/// Compare the tape's gradients against central differences
/// `(f(x+eps) - f(x-eps)) / (2 eps)` for every parameter element (or a
/// seeded subsample of large parameters). Returns the maximum relative
/// error `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// The loss closure must be a pure function of the parameter values; it is
/// re-run under perturbed parameters, always on an inference-mode tape.
pub fn gradient_check(
    set: &mut ParamSet,
    seed: u64,
    mut loss: impl FnMut(&mut Tape, &ParamSet) -> Result<NodeId, NeuralError>,
) -> Result<f64, NeuralError> {
    // Analytic pass.
    let mut tape = Tape::inference();
    let root = loss(&mut tape, set)?;
    if tape.value(root).len() != 1 {
        return Err(NeuralError::ShapeMismatch {
            op: "gradient_check loss".into(),
            left: tape.value(root).shape().to_vec(),
            right: vec![1],
        });
    }
    let grads = tape.backward(root);
    set.zero_grads();
    tape.apply_gradients(&grads, set);

    let analytic: Vec<Vec<f64>> = set.iter().map(|p| p.grad.data().to_vec()).collect();
    let mut rng = SeededRng::new(seed, 0xC0FFEE);
    let mut max_rel = 0.0f64;

    for pi in 0..set.len() {
        let len = set.get(super::param::ParamId(pi)).value.len();
        let indices: Vec<usize> = if len <= GRADCHECK_SAMPLES_PER_PARAM {
            (0..len).collect()
        } else {
            (0..GRADCHECK_SAMPLES_PER_PARAM).map(|_| rng.below(len as u64) as usize).collect()
        };
        for idx in indices {
            let id = super::param::ParamId(pi);
            let original = set.get(id).value.data()[idx];

            set.get_mut(id).value.data_mut()[idx] = original + GRADCHECK_EPSILON;
            let mut t = Tape::inference();
            let n = loss(&mut t, set)?;
            let plus = t.value(n).item();

            set.get_mut(id).value.data_mut()[idx] = original - GRADCHECK_EPSILON;
            let mut t = Tape::inference();
            let n = loss(&mut t, set)?;
            let minus = t.value(n).item();

            set.get_mut(id).value.data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * GRADCHECK_EPSILON);
            let a = analytic[pi][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    #[test]
    fn linear_softmax_toy_model_passes_tightly() {
        let mut set = ParamSet::new();
        let mut rng = SeededRng::new(0, 0);
        let w = set.add_uniform("w", vec![3, 4], 0.08, &mut rng);
        let b = set.add_uniform("b", vec![3], 0.08, &mut rng);
        let x = Tensor::vector(vec![0.5, -1.0, 2.0, 0.25]);
        let max_rel = gradient_check(&mut set, 0, |tape, set| {
            let wn = tape.param(set, w);
            let bn = tape.param(set, b);
            let xn = tape.constant(x.clone());
            let z = tape.matmul(wn, xn)?;
            let z = tape.add(z, bn)?;
            tape.cross_entropy(z, 1)
        })
        .unwrap();
        assert!(max_rel < 1e-6, "max rel error {max_rel}");
    }

    #[test]
    fn every_primitive_op_passes() {
        let mut set = ParamSet::new();
        let mut rng = SeededRng::new(7, 0);
        let a = set.add_uniform("a", vec![3, 3], 0.08, &mut rng);
        let v = set.add_uniform("v", vec![3], 0.08, &mut rng);
        let max_rel = gradient_check(&mut set, 7, |tape, set| {
            let an = tape.param(set, a);
            let vn = tape.param(set, v);
            let at = tape.transpose(an)?;
            let prod = tape.matmul(at, an)?; // AᵀA
            let mv = tape.matmul(prod, vn)?;
            let t = tape.tanh(mv);
            let s = tape.sigmoid(t);
            let sm = tape.softmax(s);
            let lo = tape.slice(sm, 0, 2)?;
            let hi = tape.slice(sm, 1, 3)?;
            let m = tape.mul(lo, hi)?;
            let row0 = tape.row(prod, 0)?;
            let r = tape.slice(row0, 0, 2)?;
            let sum = tape.add(m, r)?;
            let cat = tape.concat(&[sum, m])?;
            Ok(tape.sum_all(cat))
        })
        .unwrap();
        assert!(max_rel < 1e-4, "max rel error {max_rel}");
    }
}
