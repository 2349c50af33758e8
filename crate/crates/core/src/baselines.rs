//! Reference schedulers: serial per-step temporal ensembling and open-loop
//! chunk execution.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::policy::{check_chunk, ObservationSource, Policy};
use crate::scheduler::{
    check_record, run_logical, DropLedger, EpisodeResult, Launch, LaunchPhase, LaunchTicket,
    PredictionRecord, Scheduler, StepOutput, StepPlan,
};
use crate::types::{ensemble_weights, weighted_apply, ActionVector, Mode, SchedulerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    PerStepTe,
    OpenLoop,
}

impl From<BaselineKind> for Mode {
    fn from(k: BaselineKind) -> Mode {
        match k {
            BaselineKind::PerStepTe => Mode::PerStepTe,
            BaselineKind::OpenLoop => Mode::OpenLoop,
        }
    }
}

/// Serial temporal ensembling: the executor waits for a fresh prediction
/// before every action. The chunk predicted from observation `t` is
/// committed before step `t + 1` and contributes to every later step it
/// covers; all live chunks are averaged oldest first, exactly as TEDA does.
#[derive(Debug, Clone)]
pub struct PerStepTe {
    cfg: SchedulerConfig,
    steps_done: usize,
    launches: usize,
    staged_initial: Option<Vec<ActionVector>>,
    chunks: VecDeque<PredictionRecord>,
    pending: Option<LaunchTicket>,
    ledger: DropLedger,
}

impl PerStepTe {
    pub fn new(cfg: &SchedulerConfig, initial: Vec<ActionVector>) -> Result<Self> {
        cfg.validate()?;
        if cfg.chunk_size < 2 && cfg.episode_length >= 1 {
            return Err(Error::Infeasible(
                "per-step ensembling needs k >= 2: a chunk is first used one step after its observation".into(),
            ));
        }
        check_chunk(&initial, cfg.chunk_size, cfg.action_dim)?;
        Ok(Self {
            cfg: cfg.clone(),
            steps_done: 0,
            launches: 0,
            staged_initial: Some(initial),
            chunks: VecDeque::new(),
            pending: None,
            ledger: DropLedger::default(),
        })
    }
}

impl Scheduler for PerStepTe {
    fn mode(&self) -> Mode {
        Mode::PerStepTe
    }

    fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    fn steps_done(&self) -> usize {
        self.steps_done
    }

    fn plan(&self) -> Option<StepPlan> {
        if self.steps_done >= self.cfg.episode_length {
            return None;
        }
        let t = self.steps_done + 1;
        let launch = (t < self.cfg.episode_length).then(|| Launch {
            ticket: LaunchTicket {
                tp_index: self.launches + 1,
                start_step: t,
                completion_step: t + 1,
            },
            phase: LaunchPhase::AfterApply,
        });
        Some(StepPlan {
            step: t,
            commit: self.pending,
            launch,
        })
    }

    fn apply(&mut self, completed: Option<PredictionRecord>) -> Result<StepOutput> {
        let plan = self.plan().ok_or(Error::EpisodeEnded {
            episode_length: self.cfg.episode_length,
        })?;
        check_record(plan.commit, completed.as_ref(), &self.cfg)?;
        let t = plan.step;

        if let Some(actions) = self.staged_initial.take() {
            self.chunks.push_back(PredictionRecord {
                tp_index: 0,
                start_step: 0,
                completion_step: 0,
                actions,
            });
            self.ledger.record(0, 0);
        }
        if let Some(rec) = completed {
            self.pending = None;
            self.ledger
                .record(rec.tp_index, rec.completion_step - rec.start_step);
            self.chunks.push_back(rec);
        }
        while self
            .chunks
            .front()
            .is_some_and(|c| c.start_step + c.actions.len() <= t)
        {
            self.chunks.pop_front();
        }

        let live: Vec<&ActionVector> = self
            .chunks
            .iter()
            .filter(|c| c.completion_step <= t && c.start_step <= t)
            .filter_map(|c| c.actions.get(t - c.start_step))
            .collect();
        if live.is_empty() {
            return Err(Error::EmptyEnsemble { step: t });
        }
        let action = weighted_apply(&live, &ensemble_weights(live.len(), self.cfg.weight_decay))?;

        if let Some(l) = plan.launch {
            self.pending = Some(l.ticket);
            self.launches += 1;
        }
        self.steps_done = t;
        Ok(StepOutput {
            step: t,
            action,
            ensemble_size: live.len(),
            drops_cum: self.ledger.total(),
            inflight: false,
        })
    }

    fn outstanding(&self) -> Option<LaunchTicket> {
        None
    }

    fn finish(&mut self, completed: Option<PredictionRecord>) -> Result<()> {
        check_record(None, completed.as_ref(), &self.cfg)
    }

    fn ledger(&self) -> &DropLedger {
        &self.ledger
    }

    fn predictions(&self) -> usize {
        1 + self.launches
    }
}

/// Open-loop chunking: predict at `t = 1, k+1, 2k+1, ...` and execute each
/// chunk in order with no ensembling.
#[derive(Debug, Clone)]
pub struct OpenLoop {
    cfg: SchedulerConfig,
    steps_done: usize,
    launches: usize,
    current: Option<PredictionRecord>,
    ledger: DropLedger,
}

impl OpenLoop {
    pub fn new(cfg: &SchedulerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            steps_done: 0,
            launches: 0,
            current: None,
            ledger: DropLedger::default(),
        })
    }
}

impl Scheduler for OpenLoop {
    fn mode(&self) -> Mode {
        Mode::OpenLoop
    }

    fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    fn steps_done(&self) -> usize {
        self.steps_done
    }

    fn plan(&self) -> Option<StepPlan> {
        if self.steps_done >= self.cfg.episode_length {
            return None;
        }
        let t = self.steps_done + 1;
        if !(t - 1).is_multiple_of(self.cfg.chunk_size) {
            return Some(StepPlan {
                step: t,
                commit: None,
                launch: None,
            });
        }
        let ticket = LaunchTicket {
            tp_index: self.launches,
            start_step: t,
            completion_step: t,
        };
        Some(StepPlan {
            step: t,
            commit: Some(ticket),
            launch: Some(Launch {
                ticket,
                phase: LaunchPhase::BeforeApply,
            }),
        })
    }

    fn apply(&mut self, completed: Option<PredictionRecord>) -> Result<StepOutput> {
        let plan = self.plan().ok_or(Error::EpisodeEnded {
            episode_length: self.cfg.episode_length,
        })?;
        check_record(plan.commit, completed.as_ref(), &self.cfg)?;
        let t = plan.step;
        if let Some(rec) = completed {
            self.launches += 1;
            self.ledger.record(rec.tp_index, 0);
            self.current = Some(rec);
        }
        let chunk = self
            .current
            .as_ref()
            .ok_or(Error::EmptyEnsemble { step: t })?;
        let action = chunk
            .actions
            .get(t - chunk.start_step)
            .cloned()
            .ok_or(Error::EmptyEnsemble { step: t })?;
        self.steps_done = t;
        Ok(StepOutput {
            step: t,
            action,
            ensemble_size: 1,
            drops_cum: 0,
            inflight: false,
        })
    }

    fn outstanding(&self) -> Option<LaunchTicket> {
        None
    }

    fn finish(&mut self, completed: Option<PredictionRecord>) -> Result<()> {
        check_record(None, completed.as_ref(), &self.cfg)
    }

    fn ledger(&self) -> &DropLedger {
        &self.ledger
    }

    fn predictions(&self) -> usize {
        self.launches
    }
}

pub fn run_per_step_te<P, O>(
    cfg: &SchedulerConfig,
    policy: &P,
    observations: &O,
) -> Result<EpisodeResult>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    crate::scheduler::check_policy(cfg, policy)?;
    let initial = policy.predict(&observations.observe(0)?, 0)?;
    run_logical(PerStepTe::new(cfg, initial)?, policy, observations)
}

pub fn run_open_loop<P, O>(
    cfg: &SchedulerConfig,
    policy: &P,
    observations: &O,
) -> Result<EpisodeResult>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    crate::scheduler::check_policy(cfg, policy)?;
    run_logical(OpenLoop::new(cfg)?, policy, observations)
}
