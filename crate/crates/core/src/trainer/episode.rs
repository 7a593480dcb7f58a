//! One simulated training episode: observe, pick an action, run its phase
//! plan to completion, measure the delay change, record the experience.

use std::sync::Arc;

use rand_chacha::ChaCha12Rng;

use crate::demand::ArrivalSchedule;
use crate::nn::{QModel, RmspropConfig};
use crate::signal::{transition_sequence, ActionId, Phase};
use crate::sim::{SimError, SimParams, SimState};

use super::replay::Experience;
use super::{online_train_step, reward, select_action};

/// An action-value model that can build its own observation from the
/// simulator state.
pub trait TrafficAgent: QModel {
    fn observe(sim: &SimState, last_action: ActionId, params: &SimParams) -> Self::State;
}

impl TrafficAgent for crate::nn::TwoTowerQNet {
    fn observe(sim: &SimState, last_action: ActionId, params: &SimParams) -> Self::State {
        crate::dtse::encode(sim, last_action, params)
    }
}

/// Inputs of one episode run.
pub struct EpisodeSettings<'a> {
    /// Exploration probability for every decision in the episode.
    pub eps: f64,
    /// Minimum simulated seconds; the episode ends at the first decision
    /// boundary at or past this count.
    pub sim_len: u32,
    pub params: &'a SimParams,
    pub schedule: &'a ArrivalSchedule,
}

/// Per-step and per-decision records of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    /// Reward of each executed action, in order.
    pub rewards: Vec<f64>,
    /// Index of each executed action.
    pub actions: Vec<usize>,
    /// Total queued vehicles, sampled every simulated second.
    pub queue_samples: Vec<u32>,
    /// Cumulative in-network delay at each measurement instant.
    pub delay_samples: Vec<f64>,
    /// Travel time of every vehicle that completed its trip.
    pub travel_times: Vec<f64>,
    /// Vehicles that crossed the intersection.
    pub throughput: u64,
    /// Simulated seconds executed.
    pub steps: u32,
}

/// Episode result: any experiences not handed to the chunk sink, plus the
/// trace.
#[derive(Debug)]
pub struct EpisodeOutcome<S> {
    pub experiences: Vec<Experience<S>>,
    pub trace: EpisodeTrace,
}

/// Runs one episode.
///
/// The signal starts in (and the first observation credits) the first green
/// phase. Each loop turn observes the state, selects an action epsilon-
/// greedily, executes the full transition sequence to that action's green,
/// and records the delay change across the executed plan as the reward.
///
/// With `online` set, the model trains on every transition as it happens.
/// With `chunk` set, completed experiences are handed to the sink in chunks
/// of exactly the given size; the remainder is returned in the outcome.
pub fn run_episode<M: TrafficAgent>(
    model: &mut M,
    settings: &EpisodeSettings<'_>,
    action_rng: &mut ChaCha12Rng,
    online: Option<(f32, &RmspropConfig)>,
    mut chunk: Option<(usize, &mut dyn FnMut(Vec<Experience<M::State>>))>,
) -> Result<EpisodeOutcome<M::State>, SimError> {
    let mut sim = SimState::new(Phase::NsGreen);
    sim.load_arrivals(settings.schedule);
    let mut current_green = Phase::NsGreen;
    let mut last_action = ActionId::new(0).unwrap();

    let mut trace = EpisodeTrace::default();
    let mut buffer: Vec<Experience<M::State>> = Vec::new();
    let mut delay_before = sim.cumulative_delay();
    let mut state = Arc::new(M::observe(&sim, last_action, settings.params));

    while trace.steps < settings.sim_len {
        let q = model.q_values(&state);
        let action_index = select_action(&q, settings.eps, action_rng);
        let action = ActionId::new(action_index).expect("model output width is the action count");
        let plan = transition_sequence(current_green, action)
            .expect("current phase is always a green phase");
        for &(phase, duration) in &plan.phases {
            sim.active_phase = phase;
            for _ in 0..duration {
                let events = sim.step(settings.params)?;
                trace.steps += 1;
                trace.queue_samples.push(sim.queue_length(None) as u32);
                for v in &events.exited {
                    trace.throughput += 1;
                    trace
                        .travel_times
                        .push(f64::from(v.travel_time().expect("exited vehicles are stamped")));
                }
            }
        }
        current_green = action.green_phase();
        last_action = action;

        let delay_after = sim.cumulative_delay();
        let r = reward(delay_before, delay_after);
        delay_before = delay_after;
        trace.delay_samples.push(delay_after);
        trace.rewards.push(r);
        trace.actions.push(action_index);

        let next_state = Arc::new(M::observe(&sim, last_action, settings.params));
        if let Some((gamma, rms)) = online {
            online_train_step(model, &state, action_index, r as f32, &next_state, gamma, rms);
        }
        buffer.push(Experience {
            state: Arc::clone(&state),
            action: action_index,
            reward: r as f32,
            next_state: Arc::clone(&next_state),
        });
        state = next_state;

        if let Some((size, sink)) = chunk.as_mut() {
            if buffer.len() == *size {
                sink(std::mem::take(&mut buffer));
            }
        }
    }

    Ok(EpisodeOutcome {
        experiences: buffer,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{schedule_arrivals, DemandProfile};
    use crate::nn::TwoTowerQNet;
    use rand::SeedableRng;

    fn profile() -> DemandProfile {
        DemandProfile::symmetric(350.0, 100.0, 100.0).unwrap()
    }

    #[test]
    fn zero_length_episode_is_empty() {
        let params = SimParams::default();
        let schedule = schedule_arrivals(&profile(), 0.0, 0);
        let settings = EpisodeSettings {
            eps: 1.0,
            sim_len: 0,
            params: &params,
            schedule: &schedule,
        };
        let mut model = TwoTowerQNet::new(0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let out = run_episode(&mut model, &settings, &mut rng, None, None).unwrap();
        assert!(out.experiences.is_empty());
        assert_eq!(out.trace, EpisodeTrace::default());
    }

    #[test]
    fn fixed_seeds_reproduce_the_buffer() {
        let params = SimParams::default();
        let schedule = schedule_arrivals(&profile(), 320.0, 9);
        let run = || {
            let settings = EpisodeSettings {
                eps: 0.5,
                sim_len: 300,
                params: &params,
                schedule: &schedule,
            };
            let mut model = TwoTowerQNet::new(3);
            let mut rng = ChaCha12Rng::seed_from_u64(21);
            let out = run_episode(&mut model, &settings, &mut rng, None, None).unwrap();
            let exps: Vec<(usize, u32, u32)> = out
                .experiences
                .iter()
                .map(|e| (e.action, e.reward.to_bits(), 0u32))
                .collect();
            (exps, out.trace)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn chunked_sink_receives_full_chunks_only() {
        let params = SimParams::default();
        let schedule = schedule_arrivals(&profile(), 320.0, 2);
        let settings = EpisodeSettings {
            eps: 1.0,
            sim_len: 300,
            params: &params,
            schedule: &schedule,
        };
        let mut model = TwoTowerQNet::new(1);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut chunks: Vec<usize> = Vec::new();
        let mut sink = |c: Vec<Experience<_>>| chunks.push(c.len());
        let out = run_episode(&mut model, &settings, &mut rng, None, Some((16, &mut sink))).unwrap();
        assert!(chunks.iter().all(|&n| n == 16));
        assert!(out.experiences.len() < 16);
        let total = chunks.iter().sum::<usize>() + out.experiences.len();
        assert_eq!(total, out.trace.rewards.len());
        assert!(total > 0);
    }

    #[test]
    fn measurement_instants_chain() {
        // Rewards telescope: their sum equals minus the final delay sample.
        let params = SimParams::default();
        let schedule = schedule_arrivals(&profile(), 620.0, 8);
        let settings = EpisodeSettings {
            eps: 1.0,
            sim_len: 600,
            params: &params,
            schedule: &schedule,
        };
        let mut model = TwoTowerQNet::new(2);
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let out = run_episode(&mut model, &settings, &mut rng, None, None).unwrap();
        let total: f64 = out.trace.rewards.iter().sum();
        let last = *out.trace.delay_samples.last().unwrap();
        assert!((total + last).abs() < 1e-6);
    }

    #[test]
    fn random_policy_rewards_grow_in_magnitude() {
        // Fully exploratory control oversaturates the intersection, so the
        // delay swings late in the episode dwarf the early ones.
        let params = SimParams::default();
        let schedule = schedule_arrivals(&profile(), 4520.0, 33);
        let settings = EpisodeSettings {
            eps: 1.0,
            sim_len: 4500,
            params: &params,
            schedule: &schedule,
        };
        let mut model = TwoTowerQNet::new(5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let out = run_episode(&mut model, &settings, &mut rng, None, None).unwrap();
        let r = &out.trace.rewards;
        let quarter = r.len() / 4;
        let head: f64 = r[..quarter].iter().map(|x| x.abs()).sum::<f64>() / quarter as f64;
        let tail: f64 = r[r.len() - quarter..].iter().map(|x| x.abs()).sum::<f64>() / quarter as f64;
        assert!(
            tail > head,
            "expected growing reward magnitude, head {head:.2} tail {tail:.2}"
        );
    }
}
