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
fn probe_robustness() {
    let params = SimParams::default();
    let demand = DemandProfile::symmetric(250.0, 150.0, 100.0).unwrap();
    // (batch, lr, seed, exp_refill)
    let combos: &[(usize, f32, u64, u32)] = &[
        (4, 0.002, 1, 200),
        (4, 0.002, 2, 200),
        (4, 0.002, 3, 200),
        (8, 0.002, 7, 200),
        (4, 0.0015, 7, 200),
        (4, 0.002, 7, 67),
    ];
    for &(batch, lr, seed, refill) in combos {
        let cfg = TrainConfig {
            epochs: 200, sim_len: 1000, workers: 2, batch_size: batch,
            max_size: 50_000, min_size: 5_000, exp_refill: refill,
            gamma: 0.95, seed,
            rmsprop: RmspropConfig { learning_rate: lr, ..Default::default() },
        };
        let dir = tempfile::tempdir().unwrap();
        let out = train(&cfg, &demand, &params, AgentKind::Dqtsca, dir.path()).unwrap();
        let rewards: Vec<f64> = out.rows.iter().map(|r| r.metrics.total_reward).collect();
        let blocks: Vec<String> = rewards.chunks(20).map(|c| format!("{:.0}", mean(c))).collect();
        let n = rewards.len();
        println!(
            "b{batch} lr{lr} s{seed} rf{refill}: blocks [{}] | last20 {:.0}±{:.0} first20 {:.0}±{:.0}",
            blocks.join(", "),
            mean(&rewards[n-20..]), std_dev(&rewards[n-20..]),
            mean(&rewards[..20]), std_dev(&rewards[..20]),
        );
    }
}
