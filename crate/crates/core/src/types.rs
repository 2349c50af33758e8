//! Domain types shared by every scheduler mode, plus the schedule arithmetic
//! (drop count, prediction rows, buffer width) and the weighted ensemble rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default exponential decay for ensemble weights.
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

/// One joint-space action target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Self(vec![value; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<ActionVector> for ActionVector {
    fn as_ref(&self) -> &ActionVector {
        self
    }
}

impl std::ops::Index<usize> for ActionVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pipelined prediction with dropped actions and temporal ensembling.
    Teda,
    /// Serial observe, predict, apply at every step.
    PerStepTe,
    /// One prediction per chunk, executed without ensembling.
    OpenLoop,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Teda, Mode::PerStepTe, Mode::OpenLoop];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Teda => "teda",
            Mode::PerStepTe => "per_step_te",
            Mode::OpenLoop => "open_loop",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teda" => Ok(Mode::Teda),
            "per_step_te" => Ok(Mode::PerStepTe),
            "open_loop" => Ok(Mode::OpenLoop),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub chunk_size: usize,
    pub episode_length: usize,
    pub weight_decay: f64,
    pub action_dim: usize,
    pub mode: Mode,
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be >= 1".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidConfig("episode_length must be >= 1".into()));
        }
        if self.action_dim == 0 {
            return Err(Error::InvalidConfig("action_dim must be >= 1".into()));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Per-step latency breakdown in seconds: observation, prediction,
/// communication and execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TimingModel {
    pub fn new(t1: f64, t2: f64, t3: f64, t4: f64) -> Result<Self> {
        let tm = Self { t1, t2, t3, t4 };
        tm.validate()?;
        Ok(tm)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("t3", self.t3),
            ("t4", self.t4),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.execution_us() == 0 {
            return Err(Error::InvalidConfig(
                "t3 + t4 must be positive (at least 1 microsecond)".into(),
            ));
        }
        Ok(())
    }

    /// Predictor path latency (t1 + t2) in whole microseconds.
    pub fn prediction_us(&self) -> u64 {
        seconds_to_micros(self.t1) + seconds_to_micros(self.t2)
    }

    /// Executor path latency (t3 + t4) in whole microseconds.
    pub fn execution_us(&self) -> u64 {
        seconds_to_micros(self.t3) + seconds_to_micros(self.t4)
    }
}

pub(crate) fn seconds_to_micros(s: f64) -> u64 {
    (s * 1e6).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSchedule {
    /// Dropped actions per chunk, also the launch period in steps.
    pub drop_count: usize,
    /// Rows of the ensemble buffer (maximum prediction count).
    pub max_predictions: usize,
    /// Columns of the ensemble buffer.
    pub buffer_width: usize,
    pub f_a: f64,
    pub f_p: f64,
}

impl DerivedSchedule {
    /// Build a schedule from an explicit drop count.
    pub fn from_drop_count(chunk_size: usize, episode_length: usize, drop_count: usize) -> Self {
        let max_predictions = 2 + (episode_length.saturating_sub(1)) / drop_count;
        let buffer_width = 1 + (max_predictions - 2) * drop_count + chunk_size;
        Self {
            drop_count,
            max_predictions,
            buffer_width,
            f_a: f64::NAN,
            f_p: f64::NAN,
        }
    }
}

/// Derives the drop count, buffer rows and buffer width for a TEDA episode.
///
/// Latencies are resolved to whole microseconds before the drop count is
/// taken, so `D = ceil((t1+t2) / (t3+t4))` is exact integer arithmetic and the
/// no-stall inequality `D*(t3+t4) >= t1+t2` holds by construction.
pub fn derive_schedule(cfg: &SchedulerConfig, tm: &TimingModel) -> Result<DerivedSchedule> {
    cfg.validate()?;
    tm.validate()?;
    let pred = tm.prediction_us();
    let exec = tm.execution_us();
    let drop_count = (pred.div_ceil(exec) as usize).max(1);

    if drop_count > cfg.chunk_size {
        return Err(Error::Infeasible(format!(
            "no-stall inequality D*(t3+t4) >= t1+t2 needs D = ceil(f_a/f_p) = {drop_count} \
             ({drop_count}*{exec}us >= {pred}us), which exceeds chunk size k = {}",
            cfg.chunk_size
        )));
    }
    if let Some(step) = first_uncovered_step(cfg.chunk_size, cfg.episode_length, drop_count) {
        return Err(Error::Infeasible(format!(
            "no-stall inequality D*(t3+t4) >= t1+t2 forces D = {drop_count} \
             ({drop_count}*{exec}us >= {pred}us), and chunk size k = {} then leaves step {step} \
             without any committed action (steady state requires k >= 2*D = {})",
            cfg.chunk_size,
            2 * drop_count
        )));
    }

    let mut sched =
        DerivedSchedule::from_drop_count(cfg.chunk_size, cfg.episode_length, drop_count);
    sched.f_a = 1.0 / (tm.t3 + tm.t4);
    sched.f_p = if tm.t1 + tm.t2 > 0.0 {
        1.0 / (tm.t1 + tm.t2)
    } else {
        f64::INFINITY
    };
    Ok(sched)
}

/// First step in `1..=episode_length` that no committed chunk reaches, given
/// that the initial chunk covers `0..k` and a chunk launched at `s` is usable
/// for `s+D..s+k`.
pub fn first_uncovered_step(
    chunk_size: usize,
    episode_length: usize,
    drop_count: usize,
) -> Option<usize> {
    (1..=episode_length).find(|&t| {
        if t < chunk_size {
            return false;
        }
        if t < 1 + drop_count {
            return true;
        }
        // latest launch s = 1 + j*D with s + D <= t
        let s = 1 + ((t - 1 - drop_count) / drop_count) * drop_count;
        t > s + chunk_size - 1
    })
}

/// Exponential ensemble weights, index 0 being the oldest prediction.
pub fn ensemble_weights(n: usize, decay: f64) -> Vec<f64> {
    (0..n).map(|i| (-decay * i as f64).exp()).collect()
}

/// Weighted average `sum(w_i * a_i) / sum(w_i)`, elementwise.
pub fn weighted_apply<A: AsRef<ActionVector>>(
    actions: &[A],
    weights: &[f64],
) -> Result<ActionVector> {
    let first = actions
        .first()
        .ok_or_else(|| Error::Protocol("weighted_apply on an empty ensemble".into()))?
        .as_ref();
    if actions.len() != weights.len() {
        return Err(Error::Protocol(format!(
            "{} actions but {} weights",
            actions.len(),
            weights.len()
        )));
    }
    let dim = first.dim();
    for a in actions {
        if a.as_ref().dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: a.as_ref().dim(),
            });
        }
    }
    if actions.len() == 1 {
        return Ok(first.clone());
    }

    // accumulate offsets from the oldest action so that an ensemble of
    // identical actions reproduces that action bit for bit
    let total: f64 = weights.iter().sum();
    let mut acc = vec![0.0; dim];
    for (a, w) in actions.iter().zip(weights) {
        for ((slot, v), base) in acc.iter_mut().zip(a.as_ref().values()).zip(first.values()) {
            *slot += w * (v - base);
        }
    }
    Ok(ActionVector(
        acc.iter()
            .zip(first.values())
            .map(|(s, base)| base + s / total)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, t_a: usize) -> SchedulerConfig {
        SchedulerConfig {
            chunk_size: k,
            episode_length: t_a,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            action_dim: 1,
            mode: Mode::Teda,
        }
    }

    #[test]
    fn x5_schedule() {
        let tm = TimingModel::new(0.017, 0.103, 0.001, 0.040).unwrap();
        let s = derive_schedule(&cfg(25, 120), &tm).unwrap();
        assert_eq!(
            (s.drop_count, s.max_predictions, s.buffer_width),
            (3, 41, 143)
        );
        assert!((s.f_a - 24.390243902439025).abs() < 1e-9);
        assert!((s.f_p - 8.333333333333334).abs() < 1e-9);
    }

    #[test]
    fn instant_policy_forces_single_drop() {
        let tm = TimingModel::new(0.0, 0.0, 0.001, 0.040).unwrap();
        let s = derive_schedule(&cfg(25, 120), &tm).unwrap();
        assert_eq!(s.drop_count, 1);
        assert_eq!(s.max_predictions, 121);
        // 1 + (121 - 2) * 1 + 25
        assert_eq!(s.buffer_width, 145);
        assert!(s.f_p.is_infinite());
    }

    #[test]
    fn rejects_drop_count_above_chunk() {
        let tm = TimingModel::new(0.017, 0.5, 0.001, 0.040).unwrap();
        let err = derive_schedule(&cfg(5, 120), &tm).unwrap_err();
        assert!(err.is_infeasible());
        assert!(err.to_string().contains("D = ceil(f_a/f_p) = 13"), "{err}");
    }

    #[test]
    fn rejects_chunk_that_cannot_bridge_two_commits() {
        // D = 16 <= k = 25, but k < 2*D
        let tm = TimingModel::new(0.017, 0.614, 0.001, 0.040).unwrap();
        let err = derive_schedule(&cfg(25, 120), &tm).unwrap_err();
        assert!(err.is_infeasible());
        assert!(err.to_string().contains("k >= 2*D = 32"), "{err}");
        // short episodes never reach the gap
        assert!(derive_schedule(&cfg(25, 20), &tm).is_ok());
    }

    #[test]
    fn rejects_zero_execution_time() {
        assert!(TimingModel::new(0.1, 0.1, 0.0, 0.0).is_err());
        assert!(TimingModel::new(-0.1, 0.1, 0.0, 0.04).is_err());
    }

    #[test]
    fn coverage_matches_brute_force() {
        for k in 1..12 {
            for d in 1..6 {
                for t_a in 1..40 {
                    let expected = (1..=t_a).find(|&t| {
                        let initial = t < k;
                        let launched = (1..=t_a)
                            .filter(|s| (s - 1) % d == 0)
                            .any(|s| s + d <= t && t < s + k);
                        !(initial || launched)
                    });
                    assert_eq!(
                        first_uncovered_step(k, t_a, d),
                        expected,
                        "k={k} d={d} t_a={t_a}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights() {
        assert_eq!(ensemble_weights(3, 0.0), vec![1.0, 1.0, 1.0]);
        assert_eq!(ensemble_weights(1, 7.0), vec![1.0]);
        let w = ensemble_weights(2, std::f64::consts::LN_2);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let a = |v: &[f64]| ActionVector::new(v.to_vec()).unwrap();
        let out = weighted_apply(&[a(&[1.0]), a(&[2.0])], &[1.0, 0.5]).unwrap();
        assert!((out[0] - 4.0 / 3.0).abs() < 1e-15);

        let single = a(&[0.3, -0.7]);
        assert_eq!(
            weighted_apply(std::slice::from_ref(&single), &[0.01]).unwrap(),
            single
        );

        let ones = a(&[1.0, 1.0]);
        let out = weighted_apply(
            &[ones.clone(), ones.clone(), ones.clone()],
            &[0.2, 3.0, 0.9],
        )
        .unwrap();
        assert_eq!(out, ones);
    }

    #[test]
    fn apply_rejects_mismatch() {
        let a = ActionVector::new(vec![1.0]).unwrap();
        let b = ActionVector::new(vec![1.0, 2.0]).unwrap();
        assert!(weighted_apply(&[a.clone(), b], &[1.0, 1.0]).is_err());
        assert!(weighted_apply(&[a], &[1.0, 1.0]).is_err());
        assert!(weighted_apply::<ActionVector>(&[], &[]).is_err());
    }

    #[test]
    fn action_vector_rejects_non_finite() {
        assert!(ActionVector::new(vec![f64::NAN]).is_err());
        assert!(ActionVector::new(vec![]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weight_scale_invariance(
                vals in proptest::collection::vec(-10.0f64..10.0, 2..8),
                ws in proptest::collection::vec(0.01f64..5.0, 2..8),
                scale in 0.001f64..1000.0,
            ) {
                let n = vals.len().min(ws.len());
                let actions: Vec<_> = vals[..n].iter().map(|v| ActionVector::new(vec![*v]).unwrap()).collect();
                let scaled: Vec<f64> = ws[..n].iter().map(|w| w * scale).collect();
                let a = weighted_apply(&actions, &ws[..n]).unwrap();
                let b = weighted_apply(&actions, &scaled).unwrap();
                prop_assert!((a[0] - b[0]).abs() <= 1e-9 * (1.0 + a[0].abs()));
            }

            #[test]
            fn zero_decay_is_mean(vals in proptest::collection::vec(-10.0f64..10.0, 1..10)) {
                let actions: Vec<_> = vals.iter().map(|v| ActionVector::new(vec![*v]).unwrap()).collect();
                let out = weighted_apply(&actions, &ensemble_weights(vals.len(), 0.0)).unwrap();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                prop_assert!((out[0] - mean).abs() < 1e-12);
            }

            #[test]
            fn rows_nonincreasing_and_width_reaches_last_target(k in 1usize..40, t_a in 1usize..500, d in 1usize..10) {
                let a = DerivedSchedule::from_drop_count(k, t_a, d);
                let b = DerivedSchedule::from_drop_count(k, t_a, d + 1);
                prop_assert!(b.max_predictions <= a.max_predictions);
                // last launch is at s = 1 + j*D <= T_a and targets up to s + k - 1
                let last_launch = (1..=t_a).rev().find(|s| (s - 1) % d == 0).unwrap();
                prop_assert_eq!(a.buffer_width, last_launch + k);
                prop_assert_eq!(a.max_predictions, 1 + (1..=t_a).filter(|s| (s - 1) % d == 0).count());
            }
        }
    }
}
