//! JSON run configuration shared by the command-line tool and the FFI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compressor::ContainerFile;
use crate::error::{Error, Result};
use crate::policy::{
    MlpPolicy, NoObservations, ObservationSource, Policy, ScriptedPolicy, SeededObservations,
    Staleness, TargetTrajectory, TinyMlp,
};
use crate::types::{Mode, SchedulerConfig, TimingModel, DEFAULT_WEIGHT_DECAY};

fn default_weight_decay() -> f64 {
    DEFAULT_WEIGHT_DECAY
}

fn default_mode() -> Mode {
    Mode::Teda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Scripted {
        target: TargetTrajectory,
        #[serde(default = "zero_staleness")]
        staleness: Staleness,
    },
    /// Network loaded from a container file; a relative path resolves
    /// against the config file's directory. With `quantized`, weights go
    /// through the int16 round trip before use.
    Mlp {
        model: PathBuf,
        #[serde(default)]
        quantized: bool,
    },
}

fn zero_staleness() -> Staleness {
    Staleness::Zero
}

/// Every field is validated; timing fields have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chunk_size: usize,
    pub episode_length: usize,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub action_dim: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub policy: PolicySpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub metrics: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A policy together with the observations it is fed.
pub struct PolicyHost {
    pub policy: Box<dyn Policy>,
    pub observations: Box<dyn ObservationSource>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheduler_config().validate()?;
        self.timing()?;
        if let PolicySpec::Scripted { target, staleness } = &self.policy {
            if target.dim() != self.action_dim {
                return Err(Error::InvalidConfig(format!(
                    "scripted target has dimension {}, action_dim is {}",
                    target.dim(),
                    self.action_dim
                )));
            }
            ScriptedPolicy::new(self.chunk_size, target.clone(), staleness.clone())?;
            let finite = match staleness {
                Staleness::Zero => true,
                Staleness::Linear { slope } => slope.is_finite(),
                Staleness::Table { errors } => errors.iter().all(|e| e.is_finite()),
            };
            if !finite {
                return Err(Error::InvalidConfig("staleness must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            chunk_size: self.chunk_size,
            episode_length: self.episode_length,
            weight_decay: self.weight_decay,
            action_dim: self.action_dim,
            mode: self.mode,
        }
    }

    pub fn timing(&self) -> Result<TimingModel> {
        TimingModel::new(self.t1, self.t2, self.t3, self.t4)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn policy_host(&self) -> Result<PolicyHost> {
        match &self.policy {
            PolicySpec::Scripted { target, staleness } => Ok(PolicyHost {
                policy: Box::new(ScriptedPolicy::new(
                    self.chunk_size,
                    target.clone(),
                    staleness.clone(),
                )?),
                observations: Box::new(NoObservations),
            }),
            PolicySpec::Mlp { model, quantized } => {
                let file = ContainerFile::read(&self.resolve(model))?;
                let ContainerFile::Model(tensors) = file else {
                    return Err(Error::Format(
                        "policy model must be a multi-tensor file".into(),
                    ));
                };
                let mut net = TinyMlp::from_named(&tensors)?;
                if *quantized {
                    net = TinyMlp::from_named(&net.to_quantized_named()?)?;
                }
                let dim = net.in_dim();
                Ok(PolicyHost {
                    policy: Box::new(MlpPolicy::new(net, self.chunk_size, self.action_dim)?),
                    observations: Box::new(SeededObservations {
                        dim,
                        seed: self.seed,
                    }),
                })
            }
        }
    }
}
