//! Aggregation of episode traces into per-epoch traffic metrics and summary
//! statistics over epoch ranges.

use thiserror::Error;

use crate::trainer::EpisodeTrace;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarize an empty series")]
    Empty,
}

/// The per-epoch traffic metrics plus reward statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochMetrics {
    /// Vehicles that crossed the intersection during the epoch.
    pub throughput: f64,
    /// Mean queued-vehicle count over every simulated second.
    pub avg_queue: f64,
    /// Mean travel time of completed trips, seconds.
    pub avg_travel_time: f64,
    /// Mean cumulative in-network delay over measurement instants, seconds.
    pub avg_cum_delay: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub total_reward: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Mean and sample standard deviation; the deviation of fewer than two
/// points is zero.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

/// Reduces one episode trace to its epoch metrics.
pub fn aggregate(trace: &EpisodeTrace) -> EpochMetrics {
    let queue: Vec<f64> = trace.queue_samples.iter().map(|&q| f64::from(q)).collect();
    let (reward_mean, reward_std) = mean_std(&trace.rewards);
    EpochMetrics {
        throughput: trace.throughput as f64,
        avg_queue: mean(&queue),
        avg_travel_time: mean(&trace.travel_times),
        avg_cum_delay: mean(&trace.delay_samples),
        reward_mean,
        reward_std,
        total_reward: trace.rewards.iter().sum(),
    }
}

/// Combines the parallel episodes of one epoch by averaging each field.
pub fn combine(per_worker: &[EpochMetrics]) -> EpochMetrics {
    assert!(!per_worker.is_empty());
    let n = per_worker.len() as f64;
    let mut out = EpochMetrics::default();
    for m in per_worker {
        out.throughput += m.throughput / n;
        out.avg_queue += m.avg_queue / n;
        out.avg_travel_time += m.avg_travel_time / n;
        out.avg_cum_delay += m.avg_cum_delay / n;
        out.reward_mean += m.reward_mean / n;
        out.reward_std += m.reward_std / n;
        out.total_reward += m.total_reward / n;
    }
    out
}

/// Mean and sample standard deviation of one metric over epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

/// Summary of the headline metrics over a range of epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub epochs: usize,
    pub throughput: MetricSummary,
    pub avg_queue: MetricSummary,
    pub avg_travel_time: MetricSummary,
    pub avg_cum_delay: MetricSummary,
    pub total_reward: MetricSummary,
}

/// Per-metric mean and sample standard deviation over the given epochs.
pub fn summarize(rows: &[EpochMetrics]) -> Result<Summary, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let stat = |f: fn(&EpochMetrics) -> f64| {
        let xs: Vec<f64> = rows.iter().map(f).collect();
        let (mean, std) = mean_std(&xs);
        MetricSummary { mean, std }
    };
    Ok(Summary {
        epochs: rows.len(),
        throughput: stat(|m| m.throughput),
        avg_queue: stat(|m| m.avg_queue),
        avg_travel_time: stat(|m| m.avg_travel_time),
        avg_cum_delay: stat(|m| m.avg_cum_delay),
        total_reward: stat(|m| m.total_reward),
    })
}
