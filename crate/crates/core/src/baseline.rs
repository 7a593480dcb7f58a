//! The shallow baseline signal control agent: per-approach queue counts as
//! state, one sigmoid hidden layer, online Q-updates after every transition,
//! no replay memory.

use crate::nn::{build_stsca_net, Mlp, Param, QModel, RmspropConfig};
use crate::signal::ActionId;
use crate::sim::{Approach, SimParams, SimState};
use crate::trainer::{online_train_step, TrafficAgent};

/// Queue counts are divided by this cap before entering the sigmoid net.
pub const QUEUE_INPUT_CAP: u32 = 50;

/// Observation of the shallow agent: queued vehicles per approach (N, S, E,
/// W) and the last-action one-hot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StscaState {
    pub queues: [u32; 4],
    pub phase_onehot: [bool; ActionId::COUNT],
}

/// Counts queued vehicles over the full extent of each approach.
pub fn encode_stsca(sim: &SimState, last_action: ActionId) -> StscaState {
    let mut queues = [0u32; 4];
    for approach in Approach::ALL {
        queues[approach.index()] = sim.queue_length(Some(approach)) as u32;
    }
    let mut phase_onehot = [false; ActionId::COUNT];
    phase_onehot[last_action.index()] = true;
    StscaState {
        queues,
        phase_onehot,
    }
}

/// The shallow agent: the 8-input sigmoid net plus the fixed input scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct StscaAgent {
    net: Mlp,
}

impl StscaAgent {
    pub fn new(seed: u64) -> StscaAgent {
        StscaAgent {
            net: build_stsca_net(seed),
        }
    }

    fn features(state: &StscaState) -> [f32; 8] {
        let mut f = [0.0f32; 8];
        for (i, q) in state.queues.iter().enumerate() {
            f[i] = (*q).min(QUEUE_INPUT_CAP) as f32 / QUEUE_INPUT_CAP as f32;
        }
        for (i, p) in state.phase_onehot.iter().enumerate() {
            f[4 + i] = *p as u8 as f32;
        }
        f
    }
}

impl QModel for StscaAgent {
    type State = StscaState;

    fn num_actions(&self) -> usize {
        self.net.num_actions()
    }

    fn q_values(&self, state: &StscaState) -> Vec<f32> {
        self.net.forward(&Self::features(state))
    }

    fn accumulate_grad(&mut self, state: &StscaState, action: usize, target: f32) {
        self.net
            .accumulate_grad_slice(&Self::features(state), action, target);
    }

    fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    fn arch(&self) -> Vec<u32> {
        self.net.arch()
    }
}

impl TrafficAgent for StscaAgent {
    fn observe(sim: &SimState, last_action: ActionId, _params: &SimParams) -> StscaState {
        encode_stsca(sim, last_action)
    }
}

/// One online Q-learning update on a single transition, the baseline's whole
/// training rule: Q-target from the current parameters, one backward pass,
/// one RMSprop step.
pub fn stsca_online_step<M: QModel>(
    model: &mut M,
    state: &M::State,
    action: usize,
    reward: f32,
    next_state: &M::State,
    gamma: f32,
    rms: &RmspropConfig,
) {
    online_train_step(model, state, action, reward, next_state, gamma, rms);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Phase;
    use crate::sim::{LaneId, Movement};

    fn action(i: usize) -> ActionId {
        ActionId::new(i).unwrap()
    }

    #[test]
    fn empty_network_encodes_to_zero_counts() {
        let sim = SimState::new(Phase::NsGreen);
        let s = encode_stsca(&sim, action(0));
        assert_eq!(s.queues, [0, 0, 0, 0]);
        assert_eq!(s.phase_onehot, [true, false, false, false]);
    }

    #[test]
    fn stopped_vehicles_counted_per_approach() {
        let mut sim = SimState::new(Phase::NsGreen);
        for i in 0..3 {
            sim.insert_vehicle(
                LaneId::new(Approach::North, 1),
                Movement::Through,
                10.0 + 8.0 * f64::from(i),
                0.0,
            );
        }
        sim.insert_vehicle(LaneId::new(Approach::West, 0), Movement::Left, 5.0, 0.0);
        let s = encode_stsca(&sim, action(2));
        assert_eq!(s.queues, [3, 0, 0, 1]);
        assert_eq!(s.phase_onehot, [false, false, true, false]);
    }

    #[test]
    fn moving_vehicles_do_not_count() {
        let mut sim = SimState::new(Phase::NsGreen);
        sim.insert_vehicle(LaneId::new(Approach::East, 1), Movement::Through, 40.0, 13.0);
        sim.insert_vehicle(LaneId::new(Approach::South, 2), Movement::Through, 90.0, 2.0);
        let s = encode_stsca(&sim, action(1));
        assert_eq!(s.queues, [0, 0, 0, 0]);
    }

    #[test]
    fn features_are_capped_and_scaled() {
        let s = StscaState {
            queues: [0, 25, 50, 200],
            phase_onehot: [false, true, false, false],
        };
        let f = StscaAgent::features(&s);
        assert_eq!(&f[..4], &[0.0, 0.5, 1.0, 1.0]);
        assert_eq!(&f[4..], &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn online_step_with_zero_residual_changes_nothing() {
        let mut agent = StscaAgent::new(4);
        let s = StscaState {
            queues: [3, 0, 1, 0],
            phase_onehot: [true, false, false, false],
        };
        let q = agent.q_values(&s)[1];
        let before = agent.clone();
        // gamma = 0 makes the target the raw reward; feed back the current Q.
        stsca_online_step(&mut agent, &s, 1, q, &s, 0.0, &RmspropConfig::default());
        assert_eq!(agent, before);
    }

    #[test]
    fn online_step_is_deterministic() {
        let run = || {
            let mut agent = StscaAgent::new(7);
            let a = StscaState {
                queues: [5, 2, 0, 9],
                phase_onehot: [false, false, true, false],
            };
            let b = StscaState {
                queues: [4, 2, 0, 9],
                phase_onehot: [true, false, false, false],
            };
            for i in 0..50 {
                stsca_online_step(
                    &mut agent,
                    &a,
                    i % 4,
                    -1.0 + (i % 3) as f32,
                    &b,
                    0.95,
                    &RmspropConfig::default(),
                );
            }
            agent
        };
        assert_eq!(run(), run());
    }
}
