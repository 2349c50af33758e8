use serde::{Deserialize, Serialize};

use super::{Observation, Policy};
use crate::error::{Error, Result};
use crate::types::ActionVector;

/// Ground-truth target `g(t)` followed by a scripted policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetTrajectory {
    Constant {
        value: Vec<f64>,
    },
    /// `g_d(t) = amplitude * sin(2*pi*t/period + d*phase_step) + offset`
    Sinusoid {
        dim: usize,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase_step: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl TargetTrajectory {
    pub fn dim(&self) -> usize {
        match self {
            TargetTrajectory::Constant { value } => value.len(),
            TargetTrajectory::Sinusoid { dim, .. } => *dim,
        }
    }

    pub fn at(&self, step: usize) -> Vec<f64> {
        match self {
            TargetTrajectory::Constant { value } => value.clone(),
            TargetTrajectory::Sinusoid {
                dim,
                amplitude,
                period,
                phase_step,
                offset,
            } => (0..*dim)
                .map(|d| {
                    let angle =
                        2.0 * std::f64::consts::PI * step as f64 / period + d as f64 * phase_step;
                    amplitude * angle.sin() + offset
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TargetTrajectory::Constant { value } => {
                if value.is_empty() || value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "constant target needs finite values".into(),
                    ));
                }
            }
            TargetTrajectory::Sinusoid {
                dim,
                amplitude,
                period,
                phase_step,
                offset,
            } => {
                if *dim == 0 {
                    return Err(Error::InvalidConfig("sinusoid dim must be >= 1".into()));
                }
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::InvalidConfig("sinusoid period must be > 0".into()));
                }
                if ![amplitude, phase_step, offset]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(Error::InvalidConfig(
                        "sinusoid parameters must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Prediction error as a function of lookahead `j` (how far past the
/// observation the action targets). Added to every action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Staleness {
    Zero,
    /// `eps(j) = slope * j`
    Linear {
        slope: f64,
    },
    /// `eps(j) = errors[j]`; lookaheads past the table reuse the last entry.
    Table {
        errors: Vec<f64>,
    },
}

impl Staleness {
    pub fn at(&self, lookahead: usize) -> f64 {
        match self {
            Staleness::Zero => 0.0,
            Staleness::Linear { slope } => slope * lookahead as f64,
            Staleness::Table { errors } => errors
                .get(lookahead)
                .or(errors.last())
                .copied()
                .unwrap_or(0.0),
        }
    }
}

/// Stand-in for a trained chunking policy: predicts the target trajectory
/// with an error that grows with lookahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    pub chunk_size: usize,
    pub target: TargetTrajectory,
    pub staleness: Staleness,
    /// Last step `g` is defined for, if bounded.
    #[serde(default)]
    pub horizon: Option<usize>,
}

impl ScriptedPolicy {
    pub fn new(chunk_size: usize, target: TargetTrajectory, staleness: Staleness) -> Result<Self> {
        let p = Self {
            chunk_size,
            target,
            staleness,
            horizon: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be >= 1".into()));
        }
        self.target.validate()
    }

    /// The reference trajectory `g(1..=steps)`.
    pub fn reference(&self, steps: usize) -> Vec<ActionVector> {
        (1..=steps)
            .map(|t| ActionVector::new(self.target.at(t)).expect("validated target"))
            .collect()
    }
}

impl Policy for ScriptedPolicy {
    fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    fn action_dim(&self) -> usize {
        self.target.dim()
    }

    fn predict(&self, _observation: &Observation, start_step: usize) -> Result<Vec<ActionVector>> {
        let last = start_step + self.chunk_size - 1;
        if let Some(h) = self.horizon {
            if last > h {
                return Err(Error::Policy(format!(
                    "scripted target defined up to step {h}, chunk reaches {last}"
                )));
            }
        }
        (0..self.chunk_size)
            .map(|j| {
                let err = self.staleness.at(j);
                let mut v = self.target.at(start_step + j);
                v.iter_mut().for_each(|x| *x += err);
                ActionVector::new(v)
            })
            .collect()
    }

    fn reference_trajectory(&self, steps: usize) -> Option<Vec<ActionVector>> {
        Some(self.reference(steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn values(chunk: &[ActionVector]) -> Vec<f64> {
        chunk.iter().map(|a| a[0]).collect()
    }

    #[test]
    fn sinusoid_without_error() {
        let target = TargetTrajectory::Sinusoid {
            dim: 1,
            amplitude: 1.0,
            period: 50.0,
            phase_step: 0.0,
            offset: 0.0,
        };
        let p = ScriptedPolicy::new(3, target, Staleness::Zero).unwrap();
        let out = values(&p.predict(&Observation::default(), 0).unwrap());
        assert_eq!(
            out,
            vec![
                0.0f64.sin(),
                (2.0 * PI / 50.0).sin(),
                (4.0 * PI / 50.0).sin()
            ]
        );
    }

    #[test]
    fn linear_staleness_on_zero_target() {
        let p = ScriptedPolicy::new(
            2,
            TargetTrajectory::Constant { value: vec![0.0] },
            Staleness::Linear { slope: 0.01 },
        )
        .unwrap();
        assert_eq!(
            values(&p.predict(&Observation::default(), 5).unwrap()),
            vec![0.0, 0.01]
        );
    }

    #[test]
    fn constant_target() {
        let p = ScriptedPolicy::new(
            4,
            TargetTrajectory::Constant {
                value: vec![0.25, -1.0],
            },
            Staleness::Zero,
        )
        .unwrap();
        let chunk = p.predict(&Observation::default(), 17).unwrap();
        assert!(chunk.iter().all(|a| a.values() == [0.25, -1.0]));
    }

    #[test]
    fn horizon_bounds_domain() {
        let p = ScriptedPolicy::new(
            4,
            TargetTrajectory::Constant { value: vec![0.0] },
            Staleness::Zero,
        )
        .unwrap()
        .with_horizon(10);
        assert!(p.predict(&Observation::default(), 7).is_ok());
        assert!(p.predict(&Observation::default(), 8).is_err());
    }

    #[test]
    fn table_staleness_extends_last_entry() {
        let s = Staleness::Table {
            errors: vec![0.0, 0.5],
        };
        assert_eq!(s.at(1), 0.5);
        assert_eq!(s.at(9), 0.5);
    }
}
