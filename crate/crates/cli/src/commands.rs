//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use rand_chacha::ChaCha12Rng;

use dqtsc_core::baseline::StscaAgent;
use dqtsc_core::demand::schedule_arrivals;
use dqtsc_core::metrics::{aggregate, summarize, Summary};
use dqtsc_core::nn::{checkpoint, QModel, TwoTowerQNet};
use dqtsc_core::seeds::{derive_seed, TAG_ACTION, TAG_EVAL, TAG_SIM};
use dqtsc_core::trainer::{
    run_episode, train, AgentKind, EpisodeSettings, TrafficAgent, TrainError, TrainOutcome,
};
use rand_chacha::rand_core::SeedableRng;

use crate::config::{Resolved, RunConfig};
use crate::plot;
use crate::CliError;

#[derive(Args)]
pub struct CommonOverrides {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's epoch count.
    #[arg(long)]
    pub epochs: Option<u32>,
    /// Override the config's agent (`dqtsca` or `stsca`).
    #[arg(long)]
    pub agent: Option<String>,
}

impl CommonOverrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if let Some(agent) = &self.agent {
            cfg.agent = agent.clone();
        }
    }

    fn resolve(&self) -> Result<(RunConfig, Resolved), CliError> {
        let mut cfg = RunConfig::load_or_default(self.config.as_deref())?;
        self.apply(&mut cfg);
        let resolved = cfg.resolve()?;
        Ok((cfg, resolved))
    }
}

fn map_train_err(e: TrainError) -> CliError {
    match e {
        TrainError::BadConfig(msg) => CliError::Usage(msg),
        other => CliError::Runtime(anyhow::Error::new(other)),
    }
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonOverrides,
}

pub fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let (cfg, resolved) = args.common.resolve()?;
    std::fs::create_dir_all(&resolved.out_dir)?;
    cfg.write_echo(&resolved.out_dir)?;
    log::info!(
        "training {} for {} epochs ({} workers) into {}",
        resolved.agent,
        resolved.train.epochs,
        resolved.train.workers,
        resolved.out_dir.display()
    );
    let outcome = train(
        &resolved.train,
        &resolved.demand,
        &resolved.sim,
        resolved.agent,
        &resolved.out_dir,
    )
    .map_err(map_train_err)?;
    print_outcome_summary(&outcome)?;
    println!("metrics: {}", outcome.metrics_csv.display());
    println!("checkpoint: {}", outcome.checkpoint.display());
    Ok(())
}

fn print_outcome_summary(outcome: &TrainOutcome) -> Result<(), CliError> {
    let rows: Vec<_> = outcome.rows.iter().map(|r| r.metrics.clone()).collect();
    let k = tail_window(rows.len());
    let summary = summarize(&rows[rows.len() - k..])
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("summary: {e}")))?;
    println!("last {k} epochs:");
    print_summary_table(&[("trained", &summary)]);
    Ok(())
}

/// Epochs summarized at the end of a run: 100 at full scale, one tenth of
/// the run at reduced scale.
pub fn tail_window(epochs: usize) -> usize {
    (epochs / 10).clamp(1, 100).min(epochs.max(1))
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonOverrides,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Greedy episodes to run.
    #[arg(long, default_value_t = 1)]
    pub episodes: u32,
}

pub fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    if args.episodes == 0 {
        return Err(CliError::usage("episodes must be positive"));
    }
    let (cfg, resolved) = args.common.resolve()?;
    std::fs::create_dir_all(&resolved.out_dir)?;
    cfg.write_echo(&resolved.out_dir)?;
    match resolved.agent {
        AgentKind::Dqtsca => {
            let mut model = TwoTowerQNet::new(0);
            load_checkpoint(&mut model, &args.checkpoint)?;
            eval_model(model, &args, &resolved)
        }
        AgentKind::Stsca => {
            let mut model = StscaAgent::new(0);
            load_checkpoint(&mut model, &args.checkpoint)?;
            eval_model(model, &args, &resolved)
        }
    }
}

fn load_checkpoint<M: QModel>(model: &mut M, path: &Path) -> Result<(), CliError> {
    checkpoint::load(model, path)
        .map_err(|e| CliError::usage(format!("checkpoint {}: {e}", path.display())))
}

fn eval_model<M>(mut model: M, args: &EvalArgs, resolved: &Resolved) -> Result<(), CliError>
where
    M: TrafficAgent,
{
    let csv_path = resolved.out_dir.join("eval_metrics.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    dqtsc_core::trainer::driver::write_metrics_header(&mut csv)?;
    let mut rows = Vec::new();
    for ep in 0..args.episodes {
        let schedule = schedule_arrivals(
            &resolved.demand,
            f64::from(resolved.train.sim_len) + 16.0,
            derive_seed(resolved.train.seed, &[TAG_EVAL, TAG_SIM, u64::from(ep)]),
        );
        let mut action_rng = ChaCha12Rng::seed_from_u64(derive_seed(
            resolved.train.seed,
            &[TAG_EVAL, TAG_ACTION, u64::from(ep)],
        ));
        let settings = EpisodeSettings {
            eps: 0.0,
            sim_len: resolved.train.sim_len,
            params: &resolved.sim,
            schedule: &schedule,
        };
        let start = std::time::Instant::now();
        let outcome = run_episode(&mut model, &settings, &mut action_rng, None, None)
            .map_err(|e| CliError::Runtime(anyhow::Error::new(e)))?;
        let wall = start.elapsed().as_secs_f64();
        let metrics = aggregate(&outcome.trace);
        dqtsc_core::trainer::driver::write_metrics_row(&mut csv, ep + 1, 0.0, &metrics, wall)?;
        let trace_path = resolved
            .out_dir
            .join(format!("reward_trace_ep{}.csv", ep + 1));
        dqtsc_core::trainer::driver::write_trace_csv(&trace_path, &outcome.trace)?;
        rows.push(metrics);
    }
    csv.flush()?;
    let summary =
        summarize(&rows).map_err(|e| CliError::Runtime(anyhow::anyhow!("summary: {e}")))?;
    println!("greedy evaluation over {} episode(s):", args.episodes);
    print_summary_table(&[("eval", &summary)]);
    println!("metrics: {}", csv_path.display());
    Ok(())
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonOverrides,
}

pub fn run_compare(args: CompareArgs) -> Result<(), CliError> {
    let (cfg, resolved) = args.common.resolve()?;
    std::fs::create_dir_all(&resolved.out_dir)?;
    cfg.write_echo(&resolved.out_dir)?;

    log::info!("training shallow baseline agent");
    let stsca = train(
        &resolved.train,
        &resolved.demand,
        &resolved.sim,
        AgentKind::Stsca,
        &resolved.out_dir.join("stsca"),
    )
    .map_err(map_train_err)?;
    log::info!("training deep agent");
    let dqtsca = train(
        &resolved.train,
        &resolved.demand,
        &resolved.sim,
        AgentKind::Dqtsca,
        &resolved.out_dir.join("dqtsca"),
    )
    .map_err(map_train_err)?;

    let k = tail_window(resolved.train.epochs as usize);
    let tail = |o: &TrainOutcome| {
        let rows: Vec<_> = o.rows.iter().map(|r| r.metrics.clone()).collect();
        summarize(&rows[rows.len() - k..])
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("summary: {e}")))
    };
    let s_sum = tail(&stsca)?;
    let d_sum = tail(&dqtsca)?;

    let csv_path = resolved.out_dir.join("comparison.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "metric,stsca_mean,stsca_std,dqtsca_mean,dqtsca_std")?;
    let rows = [
        ("throughput", s_sum.throughput, d_sum.throughput),
        ("avg_queue", s_sum.avg_queue, d_sum.avg_queue),
        ("avg_travel_time", s_sum.avg_travel_time, d_sum.avg_travel_time),
        ("avg_cum_delay", s_sum.avg_cum_delay, d_sum.avg_cum_delay),
        ("total_reward", s_sum.total_reward, d_sum.total_reward),
    ];
    for (name, s, d) in rows {
        writeln!(w, "{name},{:.6},{:.6},{:.6},{:.6}", s.mean, s.std, d.mean, d.std)?;
    }
    w.flush()?;

    println!("last {k} epochs of each run (mean, std):");
    print_summary_table(&[("stsca", &s_sum), ("dqtsca", &d_sum)]);
    println!("comparison: {}", csv_path.display());
    Ok(())
}

fn print_summary_table(columns: &[(&str, &Summary)]) {
    print!("{:<18}", "metric");
    for (name, _) in columns {
        print!(" {:>24}", name);
    }
    println!();
    let rows: [(&str, fn(&Summary) -> (f64, f64)); 5] = [
        ("throughput", |s| (s.throughput.mean, s.throughput.std)),
        ("avg_queue", |s| (s.avg_queue.mean, s.avg_queue.std)),
        ("avg_travel_time", |s| {
            (s.avg_travel_time.mean, s.avg_travel_time.std)
        }),
        ("avg_cum_delay", |s| (s.avg_cum_delay.mean, s.avg_cum_delay.std)),
        ("total_reward", |s| (s.total_reward.mean, s.total_reward.std)),
    ];
    for (name, get) in rows {
        print!("{name:<18}");
        for (_, s) in columns {
            let (mean, std) = get(s);
            print!(" {:>24}", format!("({mean:.1}, {std:.1})"));
        }
        println!();
    }
}

#[derive(Args)]
pub struct PlotArgs {
    /// Output directory for the SVG files.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics or reward-trace CSV files.
    #[arg(required = true)]
    pub csvs: Vec<PathBuf>,
}

pub fn run_plot(args: PlotArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out)?;
    for csv in &args.csvs {
        let written = plot::plot_csv(csv, &args.out)?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
