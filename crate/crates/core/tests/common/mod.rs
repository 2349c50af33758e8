//! Randomized episode configurations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teda_core::policy::{ScriptedPolicy, Staleness, TargetTrajectory};
use teda_core::{Mode, SchedulerConfig, TimingModel};

pub struct Case {
    pub cfg: SchedulerConfig,
    pub timing: TimingModel,
    /// Drop count the timings were built to produce.
    pub drop_count: usize,
    pub policy: ScriptedPolicy,
}

/// Latencies with `ceil((t1+t2)/(t3+t4)) == d`, on whole microseconds.
pub fn timing_for(d: usize, rng: &mut impl Rng) -> TimingModel {
    let exec_us: u64 = rng.random_range(2_000..=60_000);
    let lo = (d as u64 - 1) * exec_us + 1;
    let hi = d as u64 * exec_us;
    let pred_us = rng.random_range(lo..=hi);
    let t1_us = rng.random_range(0..=pred_us);
    let t3_us = rng.random_range(1..exec_us);
    TimingModel::new(
        t1_us as f64 * 1e-6,
        (pred_us - t1_us) as f64 * 1e-6,
        t3_us as f64 * 1e-6,
        (exec_us - t3_us) as f64 * 1e-6,
    )
    .unwrap()
}

/// A scripted policy following a random sinusoid, with a random per-lookahead
/// error table.
pub fn random_policy(k: usize, dim: usize, rng: &mut impl Rng) -> ScriptedPolicy {
    let target = TargetTrajectory::Sinusoid {
        dim,
        amplitude: rng.random_range(0.1..2.0),
        period: rng.random_range(5.0..200.0),
        phase_step: rng.random_range(0.0..3.0),
        offset: rng.random_range(-1.0..1.0),
    };
    let scale: f64 = rng.random_range(0.0..0.2);
    let staleness = Staleness::Table {
        errors: (0..k).map(|_| rng.random_range(-scale..=scale)).collect(),
    };
    ScriptedPolicy::new(k, target, staleness).unwrap()
}

/// `k` in `[2, 30]`, `T_a` in `[10, 300]`, `D` in `[1, 5]`, restricted to
/// `k >= 2D` so every step is covered.
pub fn random_cases(n: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = rng.random_range(1..=5usize);
            let k = rng.random_range((2 * d).max(2)..=30);
            let t_a = rng.random_range(10..=300);
            let dim = rng.random_range(1..=4);
            let cfg = SchedulerConfig {
                chunk_size: k,
                episode_length: t_a,
                weight_decay: rng.random_range(0.0..0.5),
                action_dim: dim,
                mode: Mode::Teda,
            };
            Case {
                cfg,
                timing: timing_for(d, &mut rng),
                drop_count: d,
                policy: random_policy(k, dim, &mut rng),
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[teda_core::ActionVector], b: &[teda_core::ActionVector]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            x.values()
                .iter()
                .zip(y.values())
                .map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}
