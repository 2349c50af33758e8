//! Runtime and simulator for action-chunking policies under a tight
//! inference budget.
//!
//! The core is [`TedaScheduler`]: it pipelines policy prediction with action
//! execution by launching a prediction every `D` steps, dropping the `D`
//! actions whose target steps pass while the prediction runs, and applying a
//! weighted temporal ensemble of every live action for the current step.
//! [`baselines`] holds the serial per-step ensembling and open-loop
//! schedulers it is measured against, [`sim`] drives any of them in virtual
//! or real time, and [`compressor`] implements the int16 model-compression
//! path.

pub mod baselines;
pub mod compressor;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod oracle;
pub mod policy;
pub mod scheduler;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use scheduler::{run_episode, EnsembleBuffer, PredictionRecord, Scheduler, TedaScheduler};
pub use types::{
    derive_schedule, ActionVector, DerivedSchedule, Mode, SchedulerConfig, TimingModel,
};
