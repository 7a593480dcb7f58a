//! The two network architectures: the two-tower convolutional Q-network over
//! the grid encoding, and a small dense net used by the shallow baseline
//! agent and by oracle tests.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dtse::{Dtse, CELLS, GRID, LANES};
use crate::signal::ActionId;

use super::layers::{Activation, Conv2d, Dense};
use super::{Param, QModel};

const TOWER_IN: [usize; 3] = [1, LANES, CELLS];
const CONV1_FILTERS: usize = 16;
const CONV1_KERNEL: usize = 4;
const CONV1_STRIDE: usize = 2;
const CONV2_FILTERS: usize = 32;
const CONV2_KERNEL: usize = 2;
const CONV2_STRIDE: usize = 1;
const FC1_WIDTH: usize = 128;
const FC2_WIDTH: usize = 64;

/// Q-network over the grid encoding: two identical convolutional towers (one
/// for occupancy, one for normalized speed), their flattened outputs
/// concatenated with the last-action one-hot, then a dense trunk ending in
/// one linear Q-value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerQNet {
    occ1: Conv2d,
    occ2: Conv2d,
    spd1: Conv2d,
    spd2: Conv2d,
    fc1: Dense,
    fc2: Dense,
    out: Dense,
}

/// Post-activation values of one forward pass, kept for backpropagation.
pub struct TwoTowerCache {
    occ_in: Vec<f32>,
    spd_in: Vec<f32>,
    occ1: Vec<f32>,
    occ2: Vec<f32>,
    spd1: Vec<f32>,
    spd2: Vec<f32>,
    trunk_in: Vec<f32>,
    fc1: Vec<f32>,
    fc2: Vec<f32>,
    pub q: Vec<f32>,
}

impl TwoTowerQNet {
    pub fn new(seed: u64) -> TwoTowerQNet {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let occ1 = Conv2d::new(TOWER_IN, CONV1_FILTERS, CONV1_KERNEL, CONV1_STRIDE, &mut rng);
        let occ2 = Conv2d::new(occ1.out_shape, CONV2_FILTERS, CONV2_KERNEL, CONV2_STRIDE, &mut rng);
        let spd1 = Conv2d::new(TOWER_IN, CONV1_FILTERS, CONV1_KERNEL, CONV1_STRIDE, &mut rng);
        let spd2 = Conv2d::new(spd1.out_shape, CONV2_FILTERS, CONV2_KERNEL, CONV2_STRIDE, &mut rng);
        let tower_flat = occ2.out_len();
        let trunk_in = 2 * tower_flat + ActionId::COUNT;
        let fc1 = Dense::new(trunk_in, FC1_WIDTH, &mut rng);
        let fc2 = Dense::new(FC1_WIDTH, FC2_WIDTH, &mut rng);
        let out = Dense::new(FC2_WIDTH, ActionId::COUNT, &mut rng);
        TwoTowerQNet {
            occ1,
            occ2,
            spd1,
            spd2,
            fc1,
            fc2,
            out,
        }
    }

    pub fn trunk_input_width(&self) -> usize {
        self.fc1.in_dim
    }

    pub fn forward_cached(&self, dtse: &Dtse) -> TwoTowerCache {
        let occ_in: Vec<f32> = dtse.occupancy.iter().map(|&o| o as u8 as f32).collect();
        let spd_in: Vec<f32> = dtse.speed.to_vec();
        debug_assert_eq!(occ_in.len(), GRID);

        let mut occ1 = vec![0.0; self.occ1.out_len()];
        self.occ1.forward(&occ_in, &mut occ1);
        Activation::Relu.apply(&mut occ1);
        let mut occ2 = vec![0.0; self.occ2.out_len()];
        self.occ2.forward(&occ1, &mut occ2);
        Activation::Relu.apply(&mut occ2);

        let mut spd1 = vec![0.0; self.spd1.out_len()];
        self.spd1.forward(&spd_in, &mut spd1);
        Activation::Relu.apply(&mut spd1);
        let mut spd2 = vec![0.0; self.spd2.out_len()];
        self.spd2.forward(&spd1, &mut spd2);
        Activation::Relu.apply(&mut spd2);

        let mut trunk_in = Vec::with_capacity(self.fc1.in_dim);
        trunk_in.extend_from_slice(&occ2);
        trunk_in.extend_from_slice(&spd2);
        trunk_in.extend(dtse.phase_onehot.iter().map(|&p| p as u8 as f32));

        let mut fc1 = vec![0.0; self.fc1.out_dim];
        self.fc1.forward(&trunk_in, &mut fc1);
        Activation::Relu.apply(&mut fc1);
        let mut fc2 = vec![0.0; self.fc2.out_dim];
        self.fc2.forward(&fc1, &mut fc2);
        Activation::Relu.apply(&mut fc2);
        let mut q = vec![0.0; self.out.out_dim];
        self.out.forward(&fc2, &mut q);

        TwoTowerCache {
            occ_in,
            spd_in,
            occ1,
            occ2,
            spd1,
            spd2,
            trunk_in,
            fc1,
            fc2,
            q,
        }
    }

    /// Backpropagates the squared error on one action through a cached
    /// forward pass, adding into the gradient buffers.
    pub fn backward_from(&mut self, cache: &TwoTowerCache, action: usize, target: f32) {
        let mut dq = vec![0.0f32; self.out.out_dim];
        dq[action] = cache.q[action] - target;

        let mut d_fc2 = self.out.backward(&cache.fc2, &dq);
        Activation::Relu.backprop(&cache.fc2, &mut d_fc2);
        let mut d_fc1 = self.fc2.backward(&cache.fc1, &d_fc2);
        Activation::Relu.backprop(&cache.fc1, &mut d_fc1);
        let d_trunk = self.fc1.backward(&cache.trunk_in, &d_fc1);

        let tower_flat = self.occ2.out_len();
        let mut d_occ2 = d_trunk[..tower_flat].to_vec();
        Activation::Relu.backprop(&cache.occ2, &mut d_occ2);
        let mut d_occ1 = self.occ2.backward(&cache.occ1, &d_occ2);
        Activation::Relu.backprop(&cache.occ1, &mut d_occ1);
        let _ = self.occ1.backward(&cache.occ_in, &d_occ1);

        let mut d_spd2 = d_trunk[tower_flat..2 * tower_flat].to_vec();
        Activation::Relu.backprop(&cache.spd2, &mut d_spd2);
        let mut d_spd1 = self.spd2.backward(&cache.spd1, &d_spd2);
        Activation::Relu.backprop(&cache.spd1, &mut d_spd1);
        let _ = self.spd1.backward(&cache.spd_in, &d_spd1);
        // The one-hot tail of the trunk input has no parameters upstream.
    }
}

impl QModel for TwoTowerQNet {
    type State = Dtse;

    fn num_actions(&self) -> usize {
        self.out.out_dim
    }

    fn q_values(&self, state: &Dtse) -> Vec<f32> {
        self.forward_cached(state).q
    }

    fn accumulate_grad(&mut self, state: &Dtse, action: usize, target: f32) {
        let cache = self.forward_cached(state);
        self.backward_from(&cache, action, target);
    }

    fn params(&self) -> Vec<&Param> {
        vec![
            &self.occ1.w, &self.occ1.b, &self.occ2.w, &self.occ2.b,
            &self.spd1.w, &self.spd1.b, &self.spd2.w, &self.spd2.b,
            &self.fc1.w, &self.fc1.b, &self.fc2.w, &self.fc2.b,
            &self.out.w, &self.out.b,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.occ1.w, &mut self.occ1.b, &mut self.occ2.w, &mut self.occ2.b,
            &mut self.spd1.w, &mut self.spd1.b, &mut self.spd2.w, &mut self.spd2.b,
            &mut self.fc1.w, &mut self.fc1.b, &mut self.fc2.w, &mut self.fc2.b,
            &mut self.out.w, &mut self.out.b,
        ]
    }

    fn arch(&self) -> Vec<u32> {
        let mut a = vec![1u32]; // model kind: two-tower conv
        for conv in [&self.occ1, &self.occ2, &self.spd1, &self.spd2] {
            a.extend([
                1,
                conv.out_shape[0] as u32,
                conv.in_shape[0] as u32,
                conv.kernel as u32,
                conv.kernel as u32,
                conv.stride as u32,
            ]);
        }
        for dense in [&self.fc1, &self.fc2, &self.out] {
            a.extend([2, dense.out_dim as u32, dense.in_dim as u32]);
        }
        a
    }
}

/// Plain dense net: linear output layer, one activation on every hidden
/// layer. States are flat feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
}

impl Mlp {
    pub fn new(dims: &[usize], hidden: Activation, seed: u64) -> Mlp {
        assert!(dims.len() >= 2);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|d| Dense::new(d[0], d[1], &mut rng))
            .collect();
        Mlp { layers, hidden }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Activations per layer; `[0]` is the input, the last is the linear
    /// output, everything between is post-activation.
    pub fn forward_trace(&self, x: &[f32]) -> Vec<Vec<f32>> {
        assert_eq!(x.len(), self.in_dim());
        let mut acts = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.out_dim];
            layer.forward(acts.last().unwrap(), &mut out);
            if i + 1 < self.layers.len() {
                self.hidden.apply(&mut out);
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        self.forward_trace(x).pop().unwrap()
    }

    pub fn accumulate_grad_slice(&mut self, x: &[f32], action: usize, target: f32) {
        let acts = self.forward_trace(x);
        let q = acts.last().unwrap();
        let mut d = vec![0.0f32; q.len()];
        d[action] = q[action] - target;
        for i in (0..self.layers.len()).rev() {
            let mut d_in = self.layers[i].backward(&acts[i], &d);
            if i > 0 {
                self.hidden.backprop(&acts[i], &mut d_in);
            }
            d = d_in;
        }
    }
}

impl QModel for Mlp {
    type State = Vec<f32>;

    fn num_actions(&self) -> usize {
        self.out_dim()
    }

    fn q_values(&self, state: &Vec<f32>) -> Vec<f32> {
        self.forward(state)
    }

    fn accumulate_grad(&mut self, state: &Vec<f32>, action: usize, target: f32) {
        self.accumulate_grad_slice(state, action, target);
    }

    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    fn arch(&self) -> Vec<u32> {
        let mut a = vec![2u32, self.hidden.code()];
        for dense in &self.layers {
            a.extend([2, dense.out_dim as u32, dense.in_dim as u32]);
        }
        a
    }
}

/// The shallow baseline architecture: 8 inputs (four queue counts, four
/// phase bits) through one 64-unit sigmoid hidden layer to four linear
/// Q-values.
pub fn build_stsca_net(seed: u64) -> Mlp {
    Mlp::new(&[8, 64, ActionId::COUNT], Activation::Sigmoid, seed)
}
