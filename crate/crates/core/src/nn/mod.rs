//! From-scratch network math: tensors, conv/dense layers with exact
//! backpropagation, RMSprop updates, and checkpointing.
//!
//! Values are stored in 32-bit floats; reductions accumulate in 64 bits.

pub mod checkpoint;
pub mod layers;
pub mod models;

pub use models::{build_stsca_net, Mlp, TwoTowerQNet};

/// Row-major tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Tensor {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }
}

/// One parameter tensor together with its gradient accumulator and its
/// RMSprop second-moment state.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub acc: Tensor,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Param {
        Param {
            value: Tensor::zeros(shape),
            grad: Tensor::zeros(shape),
            acc: Tensor::zeros(shape),
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// RMSprop hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropConfig {
    pub learning_rate: f32,
    pub decay: f32,
    pub epsilon: f32,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            learning_rate: 0.00025,
            decay: 0.95,
            epsilon: 1e-6,
        }
    }
}

/// In-place RMSprop update of one parameter tensor from its gradient:
/// `acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/sqrt(acc + eps)`.
pub fn rmsprop_update(param: &mut Param, cfg: &RmspropConfig) {
    let n = param.len();
    for i in 0..n {
        let g = param.grad.data[i];
        let acc = cfg.decay * param.acc.data[i] + (1.0 - cfg.decay) * g * g;
        param.acc.data[i] = acc;
        param.value.data[i] -= cfg.learning_rate * g / (acc + cfg.epsilon).sqrt();
    }
}

/// An action-value network: maps a state to one Q-value per action and
/// supports gradient accumulation of the squared error on one action.
pub trait QModel: Clone + Send {
    type State;

    fn num_actions(&self) -> usize;

    /// Q-values for every action, deterministic in (params, state).
    fn q_values(&self, state: &Self::State) -> Vec<f32>;

    /// Adds the gradients of `0.5 * (q[action] - target)^2` into the
    /// parameter gradient buffers. Untaken actions contribute nothing.
    fn accumulate_grad(&mut self, state: &Self::State, action: usize, target: f32);

    fn params(&self) -> Vec<&Param>;

    fn params_mut(&mut self) -> Vec<&mut Param>;

    /// Architecture descriptor words used for checkpoint compatibility.
    fn arch(&self) -> Vec<u32>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn scale_grads(&mut self, k: f32) {
        for p in self.params_mut() {
            for g in p.grad.data_mut() {
                *g *= k;
            }
        }
    }

    /// One RMSprop step on every parameter from the accumulated gradients.
    fn rmsprop_step(&mut self, cfg: &RmspropConfig) {
        for p in self.params_mut() {
            rmsprop_update(p, cfg);
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_hand_value() {
        let mut p = Param::zeros(&[1]);
        p.grad.data_mut()[0] = 1.0;
        let cfg = RmspropConfig::default();
        rmsprop_update(&mut p, &cfg);
        assert!((p.acc.data()[0] - 0.05).abs() < 1e-6);
        // -lr / sqrt(0.05 + 1e-6) = -0.001118...
        let expect = -0.00025 / 0.050001f64.sqrt();
        assert!(
            (f64::from(p.value.data()[0]) - expect).abs() < 1e-6,
            "{}",
            p.value.data()[0]
        );
    }

    #[test]
    fn rmsprop_zero_gradient_is_noop() {
        let mut p = Param::zeros(&[3]);
        p.value.data_mut().copy_from_slice(&[1.0, -2.0, 0.5]);
        rmsprop_update(&mut p, &RmspropConfig::default());
        assert_eq!(p.value.data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn rmsprop_repeated_step_shrinks() {
        let cfg = RmspropConfig::default();
        let mut p = Param::zeros(&[1]);
        p.grad.data_mut()[0] = 1.0;
        rmsprop_update(&mut p, &cfg);
        let first = p.value.data()[0];
        p.grad.data_mut()[0] = 1.0;
        rmsprop_update(&mut p, &cfg);
        let second = p.value.data()[0] - first;
        assert!(second.abs() < first.abs(), "second step smaller as acc grows");
    }
}
