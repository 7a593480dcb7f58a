mod common;
use dqtsc_core::demand::DemandProfile;
use dqtsc_core::nn::RmspropConfig;
use dqtsc_core::sim::SimParams;
use dqtsc_core::trainer::{train, AgentKind, TrainConfig};

fn mean(xs: &[f64]) -> f64 { xs.iter().sum::<f64>() / xs.len() as f64 }
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[test]
fn probe_desk_scale() {
    let demand = DemandProfile::symmetric(350.0, 100.0, 100.0).unwrap();
    let params = SimParams::default();
    let combos: &[(f32, usize)] = &[(0.01, 16), (0.01, 4), (0.05, 16), (0.002, 4)];
    for &(lr, batch) in combos {
        let cfg = TrainConfig {
            epochs: 200, sim_len: 1000, workers: 2, batch_size: batch,
            max_size: 50_000, min_size: 5_000, exp_refill: 200,
            gamma: 0.95, seed: 7,
            rmsprop: RmspropConfig { learning_rate: lr, ..Default::default() },
        };
        let dir = tempfile::tempdir().unwrap();
        let t0 = std::time::Instant::now();
        let out = train(&cfg, &demand, &params, AgentKind::Dqtsca, dir.path()).unwrap();
        let rewards: Vec<f64> = out.rows.iter().map(|r| r.metrics.total_reward).collect();
        let delays: Vec<f64> = out.rows.iter().map(|r| r.metrics.avg_cum_delay).collect();
        let n = rewards.len();
        println!(
            "lr {lr} batch {batch}: reward first20 {:.0}±{:.0} mid {:.0} last20 {:.0}±{:.0} | delay first20 {:.0} last20 {:.0} | {:.0}s",
            mean(&rewards[..20]), std_dev(&rewards[..20]),
            mean(&rewards[90..110]),
            mean(&rewards[n-20..]), std_dev(&rewards[n-20..]),
            mean(&delays[..20]), mean(&delays[n-20..]),
            t0.elapsed().as_secs_f64()
        );
    }
}
