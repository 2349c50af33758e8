//! Policy boundary: anything that maps an observation and a start step to a
//! chunk of `k` actions.

mod mlp;
mod scripted;

pub use mlp::{Activation, Dense, MlpPolicy, TinyMlp};
pub use scripted::{ScriptedPolicy, Staleness, TargetTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ActionVector;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

pub trait ObservationSource: Sync {
    /// Observation captured at `step` (step 0 feeds the initial prediction).
    fn observe(&self, step: usize) -> Result<Observation>;
}

impl ObservationSource for [Observation] {
    fn observe(&self, step: usize) -> Result<Observation> {
        self.get(step)
            .cloned()
            .ok_or_else(|| Error::Policy(format!("no observation recorded for step {step}")))
    }
}

impl ObservationSource for Vec<Observation> {
    fn observe(&self, step: usize) -> Result<Observation> {
        self.as_slice().observe(step)
    }
}

/// Empty observations, for policies that ignore their input.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoObservations;

impl ObservationSource for NoObservations {
    fn observe(&self, _step: usize) -> Result<Observation> {
        Ok(Observation::default())
    }
}

/// Pseudo-random observations in `[-1, 1)` that depend only on `(seed, step)`.
#[derive(Debug, Clone, Copy)]
pub struct SeededObservations {
    pub dim: usize,
    pub seed: u64,
}

impl ObservationSource for SeededObservations {
    fn observe(&self, step: usize) -> Result<Observation> {
        Ok(Observation(
            (0..self.dim)
                .map(|i| unit_hash(self.seed, step as u64, i as u64) * 2.0 - 1.0)
                .collect(),
        ))
    }
}

/// splitmix64 over three words, mapped to `[0, 1)`.
pub(crate) fn unit_hash(a: u64, b: u64, c: u64) -> f64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add(c.wrapping_mul(0x1656_67B1_9E37_79F9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub trait Policy: Sync {
    fn chunk_size(&self) -> usize;

    fn action_dim(&self) -> usize;

    /// Predict `k` actions targeting `start_step .. start_step + k`.
    /// Must be deterministic in `(observation, start_step)`.
    fn predict(&self, observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>>;

    /// Observation and prediction latency `(t1, t2)` the policy claims, if any.
    fn declared_latency(&self) -> Option<(f64, f64)> {
        None
    }

    /// Trajectory `g(1..=steps)` the policy is trying to follow, when known.
    fn reference_trajectory(&self, _steps: usize) -> Option<Vec<ActionVector>> {
        None
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn chunk_size(&self) -> usize {
        (**self).chunk_size()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn predict(&self, observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>> {
        (**self).predict(observation, start_step)
    }
    fn declared_latency(&self) -> Option<(f64, f64)> {
        (**self).declared_latency()
    }
    fn reference_trajectory(&self, steps: usize) -> Option<Vec<ActionVector>> {
        (**self).reference_trajectory(steps)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn chunk_size(&self) -> usize {
        (**self).chunk_size()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn predict(&self, observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>> {
        (**self).predict(observation, start_step)
    }
    fn declared_latency(&self) -> Option<(f64, f64)> {
        (**self).declared_latency()
    }
    fn reference_trajectory(&self, steps: usize) -> Option<Vec<ActionVector>> {
        (**self).reference_trajectory(steps)
    }
}

/// Policy backed by a closure `(observation, start_step, lookahead) -> action`.
pub struct FnPolicy<F> {
    chunk_size: usize,
    action_dim: usize,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(&Observation, usize, usize) -> Vec<f64> + Sync,
{
    pub fn new(chunk_size: usize, action_dim: usize, f: F) -> Self {
        Self {
            chunk_size,
            action_dim,
            f,
        }
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&Observation, usize, usize) -> Vec<f64> + Sync,
{
    fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict(&self, observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>> {
        (0..self.chunk_size)
            .map(|j| ActionVector::new((self.f)(observation, start_step, j)))
            .collect()
    }
}

/// Pseudo-random chunks keyed on `(seed, start_step, lookahead, dim)`.
/// Every prediction differs, which makes ensemble mistakes visible.
#[derive(Debug, Clone, Copy)]
pub struct HashedPolicy {
    pub chunk_size: usize,
    pub action_dim: usize,
    pub seed: u64,
}

impl Policy for HashedPolicy {
    fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict(&self, _observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>> {
        (0..self.chunk_size)
            .map(|j| {
                let key = ((start_step as u64) << 20) ^ j as u64;
                ActionVector::new(
                    (0..self.action_dim)
                        .map(|d| unit_hash(self.seed, key, d as u64) * 2.0 - 1.0)
                        .collect(),
                )
            })
            .collect()
    }
}

pub(crate) fn check_chunk(actions: &[ActionVector], k: usize, dim: usize) -> Result<()> {
    if actions.len() != k {
        return Err(Error::ChunkLength {
            expected: k,
            actual: actions.len(),
        });
    }
    if let Some(bad) = actions.iter().find(|a| a.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    Ok(())
}
