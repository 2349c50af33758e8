//! Step-level scheduling protocol shared by TEDA and the baselines.
//!
//! A scheduler never calls the policy itself. Each step it publishes a
//! [`StepPlan`]: which in-flight prediction must be committed before the
//! step's action is applied, and which prediction (if any) it launches.
//! Drivers (the logical runner, the virtual-time simulator and the real-time
//! runner) service those launches and hand the results back to
//! [`Scheduler::apply`]. Commits therefore happen atomically, one whole chunk
//! at a time.

mod buffer;
mod teda;

pub use buffer::{Cell, EnsembleBuffer};
pub(crate) use teda::check_policy;
pub use teda::{run_episode, TedaScheduler};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::policy::{check_chunk, ObservationSource, Policy};
use crate::types::{ActionVector, Mode, SchedulerConfig};

/// Identity of one launched prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaunchTicket {
    /// Buffer row (`t_p`) the prediction will occupy.
    pub tp_index: usize,
    /// Step whose observation feeds the prediction; the chunk targets
    /// `start_step .. start_step + k`.
    pub start_step: usize,
    /// First step at which the chunk may be used.
    pub completion_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaunchPhase {
    /// Launched when the step begins, before its action executes.
    BeforeApply,
    /// Launched once the step's action has executed.
    AfterApply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Launch {
    pub ticket: LaunchTicket,
    pub phase: LaunchPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepPlan {
    pub step: usize,
    pub commit: Option<LaunchTicket>,
    pub launch: Option<Launch>,
}

/// A finished prediction: `k` actions targeting `start_step ..`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub tp_index: usize,
    pub start_step: usize,
    pub completion_step: usize,
    pub actions: Vec<ActionVector>,
}

impl PredictionRecord {
    pub fn new(ticket: LaunchTicket, actions: Vec<ActionVector>) -> Self {
        Self {
            tp_index: ticket.tp_index,
            start_step: ticket.start_step,
            completion_step: ticket.completion_step,
            actions,
        }
    }

    pub fn ticket(&self) -> LaunchTicket {
        LaunchTicket {
            tp_index: self.tp_index,
            start_step: self.start_step,
            completion_step: self.completion_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub step: usize,
    pub action: ActionVector,
    pub ensemble_size: usize,
    pub drops_cum: usize,
    /// A launched prediction was still outstanding when the action was applied.
    pub inflight: bool,
}

/// Dropped actions per prediction row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropLedger {
    per_prediction: Vec<(usize, usize)>,
    total: usize,
}

impl DropLedger {
    pub fn record(&mut self, tp_index: usize, dropped: usize) {
        self.per_prediction.push((tp_index, dropped));
        self.total += dropped;
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `(row, dropped)` for every committed prediction, in commit order.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.per_prediction
    }
}

pub trait Scheduler: Send {
    fn mode(&self) -> Mode;

    fn config(&self) -> &SchedulerConfig;

    /// Steps applied so far.
    fn steps_done(&self) -> usize;

    /// Plan for the next step, or `None` once the episode is over.
    fn plan(&self) -> Option<StepPlan>;

    /// Applies the planned step. `completed` must be the prediction named by
    /// `plan().commit`, and absent otherwise.
    fn apply(&mut self, completed: Option<PredictionRecord>) -> Result<StepOutput>;

    /// Prediction still outstanding after the final step.
    fn outstanding(&self) -> Option<LaunchTicket>;

    /// Commits the outstanding prediction after the final step, for drop
    /// accounting. A no-op when nothing is outstanding.
    fn finish(&mut self, completed: Option<PredictionRecord>) -> Result<()>;

    fn ledger(&self) -> &DropLedger;

    /// Predictions issued so far, including the initial one.
    fn predictions(&self) -> usize;
}

/// Checks a completed prediction against the ticket a scheduler expects.
pub(crate) fn check_record(
    expected: Option<LaunchTicket>,
    completed: Option<&PredictionRecord>,
    cfg: &SchedulerConfig,
) -> Result<()> {
    match (expected, completed) {
        (None, None) => Ok(()),
        (Some(t), Some(rec)) if rec.ticket() == t => {
            check_chunk(&rec.actions, cfg.chunk_size, cfg.action_dim)
        }
        (Some(t), Some(rec)) => Err(Error::Protocol(format!(
            "expected prediction {t:?}, got {:?}",
            rec.ticket()
        ))),
        (Some(t), None) => Err(Error::Protocol(format!(
            "prediction {t:?} must be committed first"
        ))),
        (None, Some(rec)) => Err(Error::Protocol(format!(
            "unexpected prediction {:?}",
            rec.ticket()
        ))),
    }
}

/// Runs a policy for one ticket.
pub fn predict_ticket<P: Policy + ?Sized, O: ObservationSource + ?Sized>(
    policy: &P,
    observations: &O,
    ticket: LaunchTicket,
) -> Result<PredictionRecord> {
    let obs = observations.observe(ticket.start_step)?;
    Ok(PredictionRecord::new(
        ticket,
        policy.predict(&obs, ticket.start_step)?,
    ))
}

/// Everything a driver observed while running one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub mode: Mode,
    pub steps: Vec<StepOutput>,
    pub ledger: DropLedger,
    pub predictions: usize,
}

impl EpisodeResult {
    pub fn trajectory(&self) -> Vec<ActionVector> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    pub fn ensemble_sizes(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.ensemble_size).collect()
    }
}

/// Drives a scheduler to completion with no notion of time: every launched
/// prediction is computed immediately and handed back when due.
pub fn run_logical<S, P, O>(mut scheduler: S, policy: &P, observations: &O) -> Result<EpisodeResult>
where
    S: Scheduler,
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    let mut pending: VecDeque<PredictionRecord> = VecDeque::new();
    let mut steps = Vec::with_capacity(scheduler.config().episode_length);
    while let Some(plan) = scheduler.plan() {
        if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::BeforeApply) {
            pending.push_back(predict_ticket(policy, observations, l.ticket)?);
        }
        let completed = match plan.commit {
            Some(_) => pending.pop_front(),
            None => None,
        };
        steps.push(scheduler.apply(completed)?);
        if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::AfterApply) {
            pending.push_back(predict_ticket(policy, observations, l.ticket)?);
        }
    }
    scheduler.finish(pending.pop_front())?;
    Ok(EpisodeResult {
        mode: scheduler.mode(),
        steps,
        ledger: scheduler.ledger().clone(),
        predictions: scheduler.predictions(),
    })
}
