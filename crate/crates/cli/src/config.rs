//! Run configuration: one flat TOML file, every key optional with the
//! defaults below, command-line flags overriding file values. Each run
//! writes back the fully resolved config so it can be reproduced exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dqtsc_core::demand::DemandProfile;
use dqtsc_core::nn::RmspropConfig;
use dqtsc_core::sim::{Movement, SimParams};
use dqtsc_core::trainer::{AgentKind, TrainConfig, TrainError};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `dqtsca` or `stsca`.
    pub agent: String,
    pub seed: u64,
    pub workers: usize,
    pub epochs: u32,
    /// Simulated seconds per epoch.
    pub sim_len: u32,
    pub gamma: f32,
    pub batch_size: usize,
    pub max_size: usize,
    pub min_size: usize,
    pub exp_refill: u32,
    pub learning_rate: f32,
    pub rms_decay: f32,
    pub rms_epsilon: f32,
    /// Through demand per approach, veh/h (Burr headways).
    pub flow_through: f64,
    /// Left-turn demand per approach, veh/h (Inverse Weibull headways).
    pub flow_left: f64,
    /// Right-turn demand per approach, veh/h (Inverse Weibull headways).
    pub flow_right: f64,
    pub v_max: f64,
    pub accel: f64,
    pub decel: f64,
    pub vehicle_length: f64,
    pub min_gap: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let rms = RmspropConfig::default();
        let sim = SimParams::default();
        RunConfig {
            agent: AgentKind::Dqtsca.to_string(),
            seed: 0,
            workers: train.workers,
            epochs: train.epochs,
            sim_len: train.sim_len,
            gamma: train.gamma,
            batch_size: train.batch_size,
            max_size: train.max_size,
            min_size: train.min_size,
            exp_refill: train.exp_refill,
            learning_rate: rms.learning_rate,
            rms_decay: rms.decay,
            rms_epsilon: rms.epsilon,
            flow_through: 350.0,
            flow_left: 100.0,
            flow_right: 100.0,
            v_max: sim.v_max,
            accel: sim.accel,
            decel: sim.decel,
            vehicle_length: sim.vehicle_length,
            min_gap: sim.min_gap,
            out_dir: PathBuf::from("runs/out"),
        }
    }
}

/// Everything a run needs, validated.
pub struct Resolved {
    pub agent: AgentKind,
    pub train: TrainConfig,
    pub sim: SimParams,
    pub demand: DemandProfile,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    /// Validates every field and assembles the typed run inputs.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let agent: AgentKind = self.agent.parse().map_err(CliError::Usage)?;
        let train = TrainConfig {
            gamma: self.gamma,
            batch_size: self.batch_size,
            epochs: self.epochs,
            exp_refill: self.exp_refill,
            sim_len: self.sim_len,
            workers: self.workers,
            seed: self.seed,
            max_size: self.max_size,
            min_size: self.min_size,
            rmsprop: RmspropConfig {
                learning_rate: self.learning_rate,
                decay: self.rms_decay,
                epsilon: self.rms_epsilon,
            },
        };
        if let Err(TrainError::BadConfig(msg)) = train.validate() {
            return Err(CliError::usage(msg));
        }
        let sim = SimParams {
            v_max: self.v_max,
            accel: self.accel,
            decel: self.decel,
            vehicle_length: self.vehicle_length,
            min_gap: self.min_gap,
            delay_speed_threshold: 0.1 * self.v_max,
            ..SimParams::default()
        };
        sim.validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        let demand = DemandProfile::symmetric(self.flow_through, self.flow_left, self.flow_right)
            .map_err(|e| {
                let field = match e {
                    dqtsc_core::demand::DemandError::FlowOutOfBand { movement, .. } => {
                        match movement {
                            Movement::Through => "flow_through",
                            Movement::Left => "flow_left",
                            Movement::Right => "flow_right",
                        }
                    }
                    _ => "demand",
                };
                CliError::usage(format!("{field}: {e}"))
            })?;
        Ok(Resolved {
            agent,
            train,
            sim,
            demand,
            out_dir: self.out_dir.clone(),
        })
    }

    /// Writes the resolved config echo used to reproduce the run.
    pub fn write_echo(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("config_resolved.toml");
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("serialize config: {e}")))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.agent, AgentKind::Dqtsca);
        assert_eq!(r.train.epochs, 1600);
        assert_eq!(r.train.sim_len, 4500);
    }

    #[test]
    fn bad_gamma_names_the_field() {
        let cfg = RunConfig {
            gamma: 1.5,
            ..RunConfig::default()
        };
        match cfg.resolve() {
            Err(CliError::Usage(msg)) => assert!(msg.contains("gamma"), "{msg}"),
            Err(other) => panic!("expected usage error, got {other:?}"),
            Ok(_) => panic!("gamma 1.5 must not resolve"),
        }
    }

    #[test]
    fn bad_flow_names_the_field() {
        let cfg = RunConfig {
            flow_through: 9999.0,
            ..RunConfig::default()
        };
        match cfg.resolve() {
            Err(CliError::Usage(msg)) => assert!(msg.contains("flow_through"), "{msg}"),
            Err(other) => panic!("expected usage error, got {other:?}"),
            Ok(_) => panic!("flow 9999 must not resolve"),
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(format!("{cfg:?}"), format!("{back:?}"));
    }
}
