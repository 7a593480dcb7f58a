//! The epoch loop: one learner owning the parameters and the replay memory,
//! worker threads running independent simulations on parameter snapshots and
//! streaming experience chunks back, per-epoch CSV rows, and the final
//! checkpoint.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::baseline::StscaAgent;
use crate::demand::{schedule_arrivals, DemandProfile};
use crate::metrics::{aggregate, combine, EpochMetrics};
use crate::nn::{checkpoint, TwoTowerQNet};
use crate::seeds::{derive_seed, TAG_ACTION, TAG_INIT, TAG_LEARNER, TAG_REFILL, TAG_SIM};
use crate::sim::SimParams;

use super::episode::{run_episode, EpisodeOutcome, EpisodeSettings, EpisodeTrace, TrafficAgent};
use super::replay::{Experience, ReplayMemory};
use super::{epsilon, replay_train_step, TrainConfig, TrainError};

/// Which agent a training run builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// Deep two-tower convolutional agent trained with experience replay.
    Dqtsca,
    /// Shallow queue-count agent trained online, no replay.
    Stsca,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Dqtsca => "dqtsca",
            AgentKind::Stsca => "stsca",
        })
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dqtsca" => Ok(AgentKind::Dqtsca),
            "stsca" => Ok(AgentKind::Stsca),
            other => Err(format!("unknown agent `{other}` (expected dqtsca or stsca)")),
        }
    }
}

/// One row of the per-epoch metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: u32,
    pub epsilon: f64,
    pub metrics: EpochMetrics,
    pub wall_seconds: f64,
}

/// Paths and rows produced by one training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub rows: Vec<EpochRow>,
    pub metrics_csv: PathBuf,
    pub checkpoint: PathBuf,
    pub first_epoch_trace_csv: PathBuf,
    pub last_epoch_trace_csv: PathBuf,
}

pub const METRICS_CSV_HEADER: &str =
    "epoch,epsilon,throughput,avg_queue,avg_travel_time,avg_cum_delay,total_reward,wall_seconds";
pub const TRACE_CSV_HEADER: &str = "action_index,reward";

pub fn write_metrics_header(w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{METRICS_CSV_HEADER}")
}

/// Fixed-precision row formatting keeps runs with identical inputs
/// byte-comparable (the wall-clock column aside).
pub fn write_metrics_row(
    w: &mut impl Write,
    epoch: u32,
    eps: f64,
    m: &EpochMetrics,
    wall_seconds: f64,
) -> std::io::Result<()> {
    writeln!(
        w,
        "{epoch},{eps:.6},{:.3},{:.6},{:.6},{:.6},{:.6},{wall_seconds:.3}",
        m.throughput, m.avg_queue, m.avg_travel_time, m.avg_cum_delay, m.total_reward
    )
}

/// Writes a per-action reward trace (reward against decision ordinal).
pub fn write_trace_csv(path: &Path, trace: &EpisodeTrace) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for (i, r) in trace.rewards.iter().enumerate() {
        writeln!(w, "{i},{r:.6}")?;
    }
    w.flush()
}

/// Trains one agent and writes `metrics.csv`, `checkpoint.dqts` and the
/// first/last epoch reward traces into `out_dir`.
///
/// The shallow agent always runs single-threaded; its config is clamped to
/// one worker. The deep agent follows `cfg.workers`.
pub fn train(
    cfg: &TrainConfig,
    demand: &DemandProfile,
    params: &SimParams,
    agent: AgentKind,
    out_dir: &Path,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    params.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let init_seed = derive_seed(cfg.seed, &[TAG_INIT]);
    match agent {
        AgentKind::Dqtsca => train_model(
            TwoTowerQNet::new(init_seed),
            Mode::Replay,
            cfg,
            demand,
            params,
            out_dir,
        ),
        AgentKind::Stsca => {
            let mut cfg = cfg.clone();
            if cfg.workers != 1 {
                log::warn!("shallow agent trains online; clamping workers {} -> 1", cfg.workers);
                cfg.workers = 1;
            }
            train_model(
                StscaAgent::new(init_seed),
                Mode::Online,
                &cfg,
                demand,
                params,
                out_dir,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Replay,
    Online,
}

enum WorkerMsg<S> {
    Chunk(Vec<Experience<S>>),
    Done(usize, Box<EpisodeOutcome<S>>),
}

fn train_model<M>(
    mut model: M,
    mode: Mode,
    cfg: &TrainConfig,
    demand: &DemandProfile,
    params: &SimParams,
    out_dir: &Path,
) -> Result<TrainOutcome, TrainError>
where
    M: TrafficAgent,
    M::State: Send + Sync,
{
    let metrics_csv = out_dir.join("metrics.csv");
    let checkpoint_path = out_dir.join("checkpoint.dqts");
    let first_trace = out_dir.join("reward_trace_first_epoch.csv");
    let last_trace = out_dir.join("reward_trace_last_epoch.csv");

    let mut csv = BufWriter::new(File::create(&metrics_csv)?);
    write_metrics_header(&mut csv)?;

    let mut memory: ReplayMemory<M::State> = ReplayMemory::new(cfg.max_size, cfg.min_size);
    let mut learner_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, &[TAG_LEARNER]));
    let mut rows = Vec::with_capacity(cfg.epochs as usize);

    for epoch in 0..cfg.epochs {
        let eps = epsilon(epoch, cfg.epochs);
        let start = Instant::now();
        let traces = match mode {
            Mode::Replay => {
                replay_epoch(&mut model, &mut memory, &mut learner_rng, cfg, demand, params, epoch, eps)?
            }
            Mode::Online => vec![online_epoch(&mut model, cfg, demand, params, epoch, eps)?],
        };
        let wall_seconds = start.elapsed().as_secs_f64();
        let per_worker: Vec<EpochMetrics> = traces.iter().map(aggregate).collect();
        let metrics = combine(&per_worker);
        write_metrics_row(&mut csv, epoch + 1, eps, &metrics, wall_seconds)?;
        if epoch == 0 {
            write_trace_csv(&first_trace, &traces[0])?;
        }
        if epoch + 1 == cfg.epochs {
            write_trace_csv(&last_trace, &traces[0])?;
        }
        log::debug!(
            "epoch {}/{}: eps {:.3}, total reward {:.1}, memory {}",
            epoch + 1,
            cfg.epochs,
            eps,
            metrics.total_reward,
            memory.len()
        );
        rows.push(EpochRow {
            epoch: epoch + 1,
            epsilon: eps,
            metrics,
            wall_seconds,
        });
        if mode == Mode::Replay && (epoch + 1) % cfg.exp_refill == 0 {
            log::debug!("refilling replay memory after epoch {}", epoch + 1);
            memory.clear();
            refill(&model, &mut memory, cfg, demand, params, epoch, eps)?;
        }
    }
    csv.flush()?;
    checkpoint::save(&model, &checkpoint_path)?;
    Ok(TrainOutcome {
        rows,
        metrics_csv,
        checkpoint: checkpoint_path,
        first_epoch_trace_csv: first_trace,
        last_epoch_trace_csv: last_trace,
    })
}

/// One replay-mode epoch: workers stream experience chunks while the learner
/// appends them and trains once per appended chunk. Experiences left over at
/// episode end are appended without a training step.
#[allow(clippy::too_many_arguments)]
fn replay_epoch<M>(
    model: &mut M,
    memory: &mut ReplayMemory<M::State>,
    learner_rng: &mut ChaCha12Rng,
    cfg: &TrainConfig,
    demand: &DemandProfile,
    params: &SimParams,
    epoch: u32,
    eps: f64,
) -> Result<Vec<EpisodeTrace>, TrainError>
where
    M: TrafficAgent,
    M::State: Send + Sync,
{
    let snapshots: Vec<M> = (0..cfg.workers).map(|_| model.clone()).collect();
    let (tx, rx) = mpsc::channel::<WorkerMsg<M::State>>();
    let horizon = f64::from(cfg.sim_len) + 16.0;
    let mut traces: Vec<Option<EpisodeTrace>> = (0..cfg.workers).map(|_| None).collect();

    std::thread::scope(|scope| -> Result<(), TrainError> {
        let mut handles = Vec::new();
        for (wid, snapshot) in snapshots.into_iter().enumerate() {
            let tx = tx.clone();
            let schedule = schedule_arrivals(
                demand,
                horizon,
                derive_seed(cfg.seed, &[TAG_SIM, u64::from(epoch), wid as u64]),
            );
            let mut action_rng = ChaCha12Rng::seed_from_u64(derive_seed(
                cfg.seed,
                &[TAG_ACTION, u64::from(epoch), wid as u64],
            ));
            let batch = cfg.batch_size;
            let sim_len = cfg.sim_len;
            handles.push(scope.spawn(move || -> Result<(), TrainError> {
                let mut worker_model = snapshot;
                let settings = EpisodeSettings {
                    eps,
                    sim_len,
                    params,
                    schedule: &schedule,
                };
                let chunk_tx = tx.clone();
                let mut sink = |chunk: Vec<Experience<M::State>>| {
                    let _ = chunk_tx.send(WorkerMsg::Chunk(chunk));
                };
                let outcome = run_episode(
                    &mut worker_model,
                    &settings,
                    &mut action_rng,
                    None,
                    Some((batch, &mut sink)),
                )?;
                let _ = tx.send(WorkerMsg::Done(wid, Box::new(outcome)));
                Ok(())
            }));
        }
        drop(tx);
        while let Ok(msg) = rx.recv() {
            match msg {
                WorkerMsg::Chunk(chunk) => {
                    for e in chunk {
                        memory.push(e);
                    }
                    replay_train_step(memory, model, cfg.batch_size, cfg.gamma, &cfg.rmsprop, learner_rng);
                }
                WorkerMsg::Done(wid, outcome) => {
                    for e in outcome.experiences {
                        memory.push(e);
                    }
                    traces[wid] = Some(outcome.trace);
                }
            }
        }
        for h in handles {
            match h.join() {
                Ok(res) => res?,
                Err(_) => {
                    return Err(TrainError::Worker(format!(
                        "worker thread panicked in epoch {}",
                        epoch + 1
                    )))
                }
            }
        }
        Ok(())
    })?;
    Ok(traces
        .into_iter()
        .map(|t| t.expect("every worker reports an outcome"))
        .collect())
}

fn online_epoch<M>(
    model: &mut M,
    cfg: &TrainConfig,
    demand: &DemandProfile,
    params: &SimParams,
    epoch: u32,
    eps: f64,
) -> Result<EpisodeTrace, TrainError>
where
    M: TrafficAgent,
{
    let schedule = schedule_arrivals(
        demand,
        f64::from(cfg.sim_len) + 16.0,
        derive_seed(cfg.seed, &[TAG_SIM, u64::from(epoch), 0]),
    );
    let mut action_rng = ChaCha12Rng::seed_from_u64(derive_seed(
        cfg.seed,
        &[TAG_ACTION, u64::from(epoch), 0],
    ));
    let settings = EpisodeSettings {
        eps,
        sim_len: cfg.sim_len,
        params,
        schedule: &schedule,
    };
    let outcome = run_episode(
        model,
        &settings,
        &mut action_rng,
        Some((cfg.gamma, &cfg.rmsprop)),
        None,
    )?;
    Ok(outcome.trace)
}

/// Refills a cleared memory to its readiness threshold with fresh epsilon-
/// greedy episodes; no training happens during the refill.
fn refill<M>(
    model: &M,
    memory: &mut ReplayMemory<M::State>,
    cfg: &TrainConfig,
    demand: &DemandProfile,
    params: &SimParams,
    epoch: u32,
    eps: f64,
) -> Result<(), TrainError>
where
    M: TrafficAgent,
    M::State: Send + Sync,
{
    let mut round: u64 = 0;
    while !memory.is_ready() {
        let outcomes = std::thread::scope(
            |scope| -> Result<Vec<EpisodeOutcome<M::State>>, TrainError> {
                let mut handles = Vec::new();
                for wid in 0..cfg.workers {
                    let snapshot = model.clone();
                    let schedule = schedule_arrivals(
                        demand,
                        f64::from(cfg.sim_len) + 16.0,
                        derive_seed(cfg.seed, &[TAG_REFILL, u64::from(epoch), round, wid as u64]),
                    );
                    let mut action_rng = ChaCha12Rng::seed_from_u64(derive_seed(
                        cfg.seed,
                        &[TAG_REFILL, TAG_ACTION, u64::from(epoch), round, wid as u64],
                    ));
                    let sim_len = cfg.sim_len;
                    handles.push(scope.spawn(
                        move || -> Result<EpisodeOutcome<M::State>, TrainError> {
                            let mut m = snapshot;
                            let settings = EpisodeSettings {
                                eps,
                                sim_len,
                                params,
                                schedule: &schedule,
                            };
                            Ok(run_episode(&mut m, &settings, &mut action_rng, None, None)?)
                        },
                    ));
                }
                let mut outs = Vec::new();
                for h in handles {
                    match h.join() {
                        Ok(r) => outs.push(r?),
                        Err(_) => return Err(TrainError::Worker("refill worker panicked".into())),
                    }
                }
                Ok(outs)
            },
        )?;
        for out in outcomes {
            for e in out.experiences {
                memory.push(e);
            }
        }
        round += 1;
    }
    Ok(())
}
