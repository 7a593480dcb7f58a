//! Shared oracles for the integration and acceptance suites: an independent
//! scalar 64-bit reference implementation of both network architectures,
//! finite-difference helpers, and a value-iteration oracle for a small chain
//! MDP. Nothing here calls into the production forward/backward path beyond
//! copying parameters out of it.

#![allow(dead_code)]

use dqtsc_core::dtse::Dtse;
use dqtsc_core::nn::QModel;

/// Parameter tensors widened to f64, in the model's declaration order.
pub fn widen_params<M: QModel>(model: &M) -> Vec<Vec<f64>> {
    model
        .params()
        .iter()
        .map(|p| p.value.data().iter().map(|&v| f64::from(v)).collect())
        .collect()
}

/// Gradient tensors flattened in declaration order.
pub fn flat_grads<M: QModel>(model: &M) -> Vec<f32> {
    model
        .params()
        .iter()
        .flat_map(|p| p.grad.data().iter().copied())
        .collect()
}

/// (tensor index, offset) for a flat parameter index.
pub fn locate(params: &[Vec<f64>], flat: usize) -> (usize, usize) {
    let mut rest = flat;
    for (i, p) in params.iter().enumerate() {
        if rest < p.len() {
            return (i, rest);
        }
        rest -= p.len();
    }
    panic!("flat index {flat} out of range");
}

pub fn total_len(params: &[Vec<f64>]) -> usize {
    params.iter().map(Vec::len).sum()
}

fn conv_valid(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    k: usize,
    stride: usize,
) -> Vec<f64> {
    let oh = (in_h - k) / stride + 1;
    let ow = (in_w - k) / stride + 1;
    let mut out = vec![0.0; out_c * oh * ow];
    for oc in 0..out_c {
        for i in 0..oh {
            for j in 0..ow {
                let mut s = b[oc];
                for ic in 0..in_c {
                    for di in 0..k {
                        for dj in 0..k {
                            let xv = x[ic * in_h * in_w + (i * stride + di) * in_w + j * stride + dj];
                            let wv = w[oc * in_c * k * k + ic * k * k + di * k + dj];
                            s += xv * wv;
                        }
                    }
                }
                out[oc * oh * ow + i * ow + j] = s;
            }
        }
    }
    out
}

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let out_d = b.len();
    let in_d = x.len();
    (0..out_d)
        .map(|o| {
            let mut s = b[o];
            for i in 0..in_d {
                s += w[o * in_d + i] * x[i];
            }
            s
        })
        .collect()
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    v
}

fn sigmoid(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = 1.0 / (1.0 + (-*x).exp());
    }
    v
}

/// Reference forward pass of the two-tower network.
///
/// `params` layout (declaration order of the production model):
/// `[occ1.w, occ1.b, occ2.w, occ2.b, spd1.w, spd1.b, spd2.w, spd2.b,
///   fc1.w, fc1.b, fc2.w, fc2.b, out.w, out.b]`.
pub fn ref_two_tower_forward(params: &[Vec<f64>], dtse: &Dtse) -> Vec<f64> {
    let occ: Vec<f64> = dtse.occupancy.iter().map(|&o| f64::from(o as u8)).collect();
    let spd: Vec<f64> = dtse.speed.iter().map(|&s| f64::from(s)).collect();
    let tower = |w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], x: &[f64]| {
        let h1 = relu(conv_valid(w1, b1, x, 1, 16, 15, 16, 4, 2));
        relu(conv_valid(w2, b2, &h1, 16, 7, 6, 32, 2, 1))
    };
    let t_occ = tower(&params[0], &params[1], &params[2], &params[3], &occ);
    let t_spd = tower(&params[4], &params[5], &params[6], &params[7], &spd);
    let mut trunk = t_occ;
    trunk.extend(t_spd);
    trunk.extend(dtse.phase_onehot.iter().map(|&p| f64::from(p as u8)));
    let h1 = relu(dense(&params[8], &params[9], &trunk));
    let h2 = relu(dense(&params[10], &params[11], &h1));
    dense(&params[12], &params[13], &h2)
}

/// Reference forward pass of a dense net with one activation on every hidden
/// layer. `params` layout: `[l0.w, l0.b, l1.w, l1.b, ...]`.
pub fn ref_mlp_forward(params: &[Vec<f64>], sigmoid_hidden: bool, x: &[f64]) -> Vec<f64> {
    let layers = params.len() / 2;
    let mut h: Vec<f64> = x.to_vec();
    for l in 0..layers {
        let mut z = dense(&params[2 * l], &params[2 * l + 1], &h);
        if l + 1 < layers {
            z = if sigmoid_hidden { sigmoid(z) } else { relu(z) };
        }
        h = z;
    }
    h
}

/// Rectifier sign pattern of the dense reference net (relu hidden layers).
pub fn ref_mlp_pattern(params: &[Vec<f64>], x: &[f64]) -> Vec<bool> {
    let layers = params.len() / 2;
    let mut pattern = Vec::new();
    let mut h: Vec<f64> = x.to_vec();
    for l in 0..layers {
        let z = dense(&params[2 * l], &params[2 * l + 1], &h);
        if l + 1 < layers {
            pattern.extend(z.iter().map(|&v| v > 0.0));
            h = relu(z);
        } else {
            h = z;
        }
    }
    pattern
}

/// True when perturbing one parameter by ±h keeps every rectifier of the
/// dense net in its region.
pub fn mlp_probe_is_smooth(params: &mut Vec<Vec<f64>>, x: &[f64], flat: usize, h: f64) -> bool {
    let (pi, off) = locate(params, flat);
    let old = params[pi][off];
    params[pi][off] = old + h;
    let up = ref_mlp_pattern(params, x);
    params[pi][off] = old - h;
    let down = ref_mlp_pattern(params, x);
    params[pi][off] = old;
    up == down
}

/// Squared-error loss on one action against a fixed target.
pub fn ref_loss(q: &[f64], action: usize, target: f64) -> f64 {
    0.5 * (q[action] - target) * (q[action] - target)
}

/// Sign pattern of every rectifier unit in the two-tower reference forward.
///
/// A central difference only estimates the derivative where the bracket
/// stays inside one linear region; probes that flip any rectifier between
/// the two loss evaluations must be discarded.
pub fn ref_two_tower_pattern(params: &[Vec<f64>], dtse: &Dtse) -> Vec<bool> {
    let occ: Vec<f64> = dtse.occupancy.iter().map(|&o| f64::from(o as u8)).collect();
    let spd: Vec<f64> = dtse.speed.iter().map(|&s| f64::from(s)).collect();
    let mut pattern = Vec::new();
    let mut tower = |w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], x: &[f64]| {
        let z1 = conv_valid(w1, b1, x, 1, 16, 15, 16, 4, 2);
        pattern.extend(z1.iter().map(|&v| v > 0.0));
        let h1 = relu(z1);
        let z2 = conv_valid(w2, b2, &h1, 16, 7, 6, 32, 2, 1);
        pattern.extend(z2.iter().map(|&v| v > 0.0));
        relu(z2)
    };
    let t_occ = tower(&params[0], &params[1], &params[2], &params[3], &occ);
    let t_spd = tower(&params[4], &params[5], &params[6], &params[7], &spd);
    let mut trunk = t_occ;
    trunk.extend(t_spd);
    trunk.extend(dtse.phase_onehot.iter().map(|&p| f64::from(p as u8)));
    let z1 = dense(&params[8], &params[9], &trunk);
    pattern.extend(z1.iter().map(|&v| v > 0.0));
    let h1 = relu(z1);
    let z2 = dense(&params[10], &params[11], &h1);
    pattern.extend(z2.iter().map(|&v| v > 0.0));
    pattern
}

/// True when perturbing one parameter by ±h keeps every rectifier of the
/// two-tower net in its region.
pub fn two_tower_probe_is_smooth(
    params: &mut Vec<Vec<f64>>,
    dtse: &Dtse,
    flat: usize,
    h: f64,
) -> bool {
    let (pi, off) = locate(params, flat);
    let old = params[pi][off];
    params[pi][off] = old + h;
    let up = ref_two_tower_pattern(params, dtse);
    params[pi][off] = old - h;
    let down = ref_two_tower_pattern(params, dtse);
    params[pi][off] = old;
    up == down
}

/// Central finite difference of `loss` with respect to one parameter.
pub fn central_difference(
    loss: &dyn Fn(&[Vec<f64>]) -> f64,
    params: &mut Vec<Vec<f64>>,
    flat: usize,
    h: f64,
) -> f64 {
    let (pi, off) = locate(params, flat);
    let old = params[pi][off];
    params[pi][off] = old + h;
    let up = loss(params);
    params[pi][off] = old - h;
    let down = loss(params);
    params[pi][off] = old;
    (up - down) / (2.0 * h)
}

/// Relative error with the unit floor used by the gradient checks.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Small deterministic chain MDP: states `0..N`, action 0 steps left, action
/// 1 steps right; only holding the rightmost state pays.
pub mod chain {
    pub const STATES: usize = 5;
    pub const ACTIONS: usize = 2;
    pub const GAMMA: f64 = 0.95;

    pub fn step(state: usize, action: usize) -> (usize, f64) {
        match action {
            1 if state == STATES - 1 => (state, 1.0),
            1 => (state + 1, 0.0),
            _ => (state.saturating_sub(1), 0.0),
        }
    }

    /// Q-values to fixed point by synchronous sweeps.
    pub fn value_iteration(sweeps: usize) -> Vec<[f64; ACTIONS]> {
        let mut q = vec![[0.0f64; ACTIONS]; STATES];
        for _ in 0..sweeps {
            let mut next = q.clone();
            for (s, row) in next.iter_mut().enumerate() {
                for (a, slot) in row.iter_mut().enumerate() {
                    let (s2, r) = step(s, a);
                    *slot = r + GAMMA * q[s2][0].max(q[s2][1]);
                }
            }
            q = next;
        }
        q
    }

    pub fn one_hot(state: usize) -> Vec<f32> {
        let mut x = vec![0.0f32; STATES];
        x[state] = 1.0;
        x
    }
}

#[cfg(test)]
mod self_checks {
    use super::chain;

    #[test]
    fn chain_oracle_fixed_point() {
        let q = chain::value_iteration(2000);
        // Holding the right end forever is worth 1/(1-gamma).
        assert!((q[4][1] - 20.0).abs() < 1e-9);
        assert!((q[3][1] - 19.0).abs() < 1e-9);
        for s in 0..chain::STATES {
            assert!(q[s][1] > q[s][0], "right beats left at {s}");
        }
    }
}
