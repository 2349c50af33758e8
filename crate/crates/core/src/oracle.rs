//! Brute-force reference for the TEDA trajectory.
//!
//! Every prediction of the episode is materialized up front, and each step's
//! action is computed straight from the ensemble rule over whichever chunks
//! reach that step. No buffer, no commit protocol, no scheduler state.

use crate::error::{Error, Result};
use crate::policy::{ObservationSource, Policy};
use crate::types::{ActionVector, SchedulerConfig};

struct Materialized {
    start: usize,
    usable_from: usize,
    actions: Vec<ActionVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub actions: Vec<ActionVector>,
    pub ensemble_sizes: Vec<usize>,
    pub predictions: usize,
}

pub fn teda_trajectory<P, O>(
    cfg: &SchedulerConfig,
    drop_count: usize,
    policy: &P,
    observations: &O,
) -> Result<OracleTrajectory>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    cfg.validate()?;
    if drop_count == 0 {
        return Err(Error::InvalidConfig("drop count must be >= 1".into()));
    }
    let k = cfg.chunk_size;
    let t_a = cfg.episode_length;

    let mut chunks = vec![Materialized {
        start: 0,
        usable_from: 1,
        actions: policy.predict(&observations.observe(0)?, 0)?,
    }];
    let mut s = 1;
    while s <= t_a {
        chunks.push(Materialized {
            start: s,
            usable_from: s + drop_count,
            actions: policy.predict(&observations.observe(s)?, s)?,
        });
        s += drop_count;
    }
    for c in &chunks {
        if c.actions.len() != k {
            return Err(Error::ChunkLength {
                expected: k,
                actual: c.actions.len(),
            });
        }
    }

    let mut actions = Vec::with_capacity(t_a);
    let mut sizes = Vec::with_capacity(t_a);
    for t in 1..=t_a {
        let live: Vec<&ActionVector> = chunks
            .iter()
            .filter(|c| c.usable_from <= t && t < c.start + k)
            .map(|c| &c.actions[t - c.start])
            .collect();
        let Some(oldest) = live.first() else {
            return Err(Error::EmptyEnsemble { step: t });
        };
        // sum w_i (a_i - a_0) / sum w_i, added back onto a_0
        let mut num = vec![0.0; cfg.action_dim];
        let mut den = 0.0;
        for (i, a) in live.iter().enumerate() {
            if a.dim() != cfg.action_dim {
                return Err(Error::DimensionMismatch {
                    expected: cfg.action_dim,
                    actual: a.dim(),
                });
            }
            let w = (-cfg.weight_decay * i as f64).exp();
            for d in 0..cfg.action_dim {
                num[d] += w * (a[d] - oldest[d]);
            }
            den += w;
        }
        let mean = (0..cfg.action_dim)
            .map(|d| oldest[d] + num[d] / den)
            .collect();
        actions.push(ActionVector::new(mean)?);
        sizes.push(live.len());
    }
    Ok(OracleTrajectory {
        actions,
        ensemble_sizes: sizes,
        predictions: chunks.len(),
    })
}
