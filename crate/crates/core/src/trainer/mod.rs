//! Q-learning with experience replay: exploration schedule, reward, target
//! construction, the replay training step, the episode runner, and the
//! parallel worker/learner training driver.

pub mod driver;
pub mod episode;
pub mod replay;

pub use driver::{train, AgentKind, EpochRow, TrainOutcome};
pub use episode::{run_episode, EpisodeOutcome, EpisodeSettings, EpisodeTrace, TrafficAgent};
pub use replay::{Experience, ReplayMemory};

use rand::Rng;
use thiserror::Error;

use crate::nn::{QModel, RmspropConfig};

/// Training hyperparameters shared by both agents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f32,
    pub batch_size: usize,
    pub epochs: u32,
    pub exp_refill: u32,
    /// Simulated seconds per epoch.
    pub sim_len: u32,
    pub workers: usize,
    pub seed: u64,
    pub max_size: usize,
    pub min_size: usize,
    pub rmsprop: RmspropConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            batch_size: 16,
            epochs: 1600,
            exp_refill: 200,
            sim_len: 4500,
            workers: 1,
            seed: 0,
            max_size: 500_000,
            min_size: 50_000,
            rmsprop: RmspropConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.gamma) || !self.gamma.is_finite() {
            return Err(TrainError::BadConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        let positives = [
            ("batch_size", self.batch_size),
            ("max_size", self.max_size),
            ("min_size", self.min_size),
            ("workers", self.workers),
        ];
        for (name, v) in positives {
            if v == 0 {
                return Err(TrainError::BadConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("exp_refill", self.exp_refill),
            ("sim_len", self.sim_len),
        ] {
            if v == 0 {
                return Err(TrainError::BadConfig(format!("{name} must be positive")));
            }
        }
        if self.min_size > self.max_size {
            return Err(TrainError::BadConfig(format!(
                "min_size {} exceeds max_size {}",
                self.min_size, self.max_size
            )));
        }
        if !(self.rmsprop.learning_rate > 0.0) {
            return Err(TrainError::BadConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rmsprop.decay) {
            return Err(TrainError::BadConfig(format!(
                "rms_decay must lie in [0, 1), got {}",
                self.rmsprop.decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] crate::nn::checkpoint::CheckpointError),
    #[error("worker failed: {0}")]
    Worker(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
}

/// Exploration probability after `n` of `total` epochs: `1 - n/total`,
/// linearly from 1 down to 0.
pub fn epsilon(n: u32, total: u32) -> f64 {
    if n > total {
        log::warn!("epoch {n} beyond schedule end {total}; epsilon clamped to 0");
        return 0.0;
    }
    1.0 - f64::from(n) / f64::from(total)
}

/// Uniform random action with probability `eps`, otherwise the argmax of the
/// Q-values with ties broken toward the lowest index.
pub fn select_action(q_values: &[f32], eps: f64, rng: &mut impl Rng) -> usize {
    debug_assert!((0.0..=1.0).contains(&eps));
    if rng.random::<f64>() < eps {
        return rng.random_range(0..q_values.len());
    }
    let mut best = 0;
    for (i, q) in q_values.iter().enumerate().skip(1) {
        if *q > q_values[best] {
            best = i;
        }
    }
    best
}

/// Reward for one executed action: the decrease in cumulative delay across
/// the action (positive when delay went down).
pub fn reward(delay_before: f64, delay_after: f64) -> f64 {
    delay_before - delay_after
}

/// Bootstrapped Q-target for one experience:
/// `r + gamma * max_a q(next_state)`.
pub fn compute_target<M: QModel>(exp: &Experience<M::State>, model: &M, gamma: f32) -> f32 {
    let next_q = model.q_values(&exp.next_state);
    let best = next_q.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    exp.reward + gamma * best
}

/// Whether a replay step actually updated the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayOutcome {
    Applied,
    NotReady,
}

/// One replay training step: sample a batch uniformly with replacement,
/// compute every target with the current parameters, accumulate the mean
/// gradient, and apply a single RMSprop update. A no-op while the memory is
/// below its readiness threshold.
pub fn replay_train_step<M: QModel>(
    memory: &ReplayMemory<M::State>,
    model: &mut M,
    batch_size: usize,
    gamma: f32,
    rms: &RmspropConfig,
    rng: &mut impl Rng,
) -> ReplayOutcome {
    if !memory.is_ready() {
        return ReplayOutcome::NotReady;
    }
    let batch = memory.sample(batch_size, rng);
    let targets: Vec<f32> = batch
        .iter()
        .map(|e| compute_target(e, model, gamma))
        .collect();
    model.zero_grads();
    for (e, target) in batch.iter().zip(&targets) {
        model.accumulate_grad(&e.state, e.action, *target);
    }
    model.scale_grads(1.0 / batch_size as f32);
    model.rmsprop_step(rms);
    model.zero_grads();
    ReplayOutcome::Applied
}

/// One online Q-learning update on a single transition: target from the
/// current parameters, one backward pass, one RMSprop step.
pub fn online_train_step<M: QModel>(
    model: &mut M,
    state: &M::State,
    action: usize,
    reward: f32,
    next_state: &M::State,
    gamma: f32,
    rms: &RmspropConfig,
) {
    let next_q = model.q_values(next_state);
    let best = next_q.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let target = reward + gamma * best;
    model.zero_grads();
    model.accumulate_grad(state, action, target);
    model.rmsprop_step(rms);
    model.zero_grads();
}
