use super::network::{LayerParams, NetworkParams};
use crate::scalar::Scalar;

/// Adam moments for one network, laid out tensor-by-tensor like
/// [`NetworkParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Moments sized for `params`, with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(params: &NetworkParams<T>, learning_rate: T) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().map(|t| vec![T::zero(); t.len()]).collect();
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub(crate) fn apply(&mut self, params: &mut NetworkParams<T>, grads: &[Option<LayerParams<T>>]) {
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let correct1 = T::one() - self.beta1.powi(t);
        let correct2 = T::one() - self.beta2.powi(t);
        let grad_tensors = grads.iter().flatten().flat_map(|g| [g.weights.values(), g.bias.as_slice()]);
        for (((theta, g), m), v) in
            params.tensors_mut().zip(grad_tensors).zip(self.first.iter_mut()).zip(self.second.iter_mut())
        {
            for i in 0..theta.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / correct1;
                let v_hat = v[i] / correct2;
                theta[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
