//! Drives any scheduler mode against a [`TimingModel`], in virtual time or
//! against the host clock.
//!
//! Timing model, shared by both drivers:
//! * one predictor and one executor; a prediction occupies the predictor for
//!   `t1 + t2`, a step occupies the executor for `t3 + t4`;
//! * a step begins, issues its before-apply launch, waits (stalls) until the
//!   prediction it must commit is available, applies its action, executes for
//!   `t3 + t4`, then issues its after-apply launch;
//! * the initial chunk of TEDA is computed before step 1 and reported as
//!   startup overhead; for per-step ensembling it is simply the prediction
//!   step 1 waits for.

mod clock;
mod metrics;
mod realtime;

pub use clock::{EventQueue, Micros};
pub use metrics::{jitter, rmse, ComparisonReport, Delta, MetricsReport, SimTrace, TraceRow};
pub use realtime::run_realtime;

use crate::baselines::{OpenLoop, PerStepTe};
use crate::error::Result;
use crate::policy::{ObservationSource, Policy};
use crate::scheduler::{
    check_policy, predict_ticket, LaunchPhase, LaunchTicket, PredictionRecord, Scheduler, StepPlan,
    TedaScheduler,
};
use crate::types::{derive_schedule, ActionVector, Mode, SchedulerConfig, TimingModel};

/// Ticket of the initial chunk, predicted from observation 0.
pub(crate) const INITIAL_TICKET: LaunchTicket = LaunchTicket {
    tp_index: 0,
    start_step: 0,
    completion_step: 0,
};

pub(crate) fn has_initial_chunk(mode: Mode) -> bool {
    matches!(mode, Mode::Teda | Mode::PerStepTe)
}

/// Validates the inputs for `mode` and returns the effective config.
pub(crate) fn prepare<P: Policy + ?Sized>(
    cfg: &SchedulerConfig,
    tm: &TimingModel,
    mode: Mode,
    policy: &P,
) -> Result<SchedulerConfig> {
    let mut cfg = cfg.clone();
    cfg.mode = mode;
    cfg.validate()?;
    tm.validate()?;
    check_policy(&cfg, policy)?;
    if mode == Mode::Teda {
        derive_schedule(&cfg, tm)?;
    }
    Ok(cfg)
}

pub(crate) fn build_scheduler(
    cfg: &SchedulerConfig,
    tm: &TimingModel,
    initial: Option<Vec<ActionVector>>,
) -> Result<Box<dyn Scheduler>> {
    let initial = || initial.ok_or_else(|| crate::Error::Protocol("initial chunk missing".into()));
    Ok(match cfg.mode {
        Mode::Teda => Box::new(TedaScheduler::new(
            cfg,
            &derive_schedule(cfg, tm)?,
            initial()?,
        )?),
        Mode::PerStepTe => Box::new(PerStepTe::new(cfg, initial()?)?),
        Mode::OpenLoop => Box::new(OpenLoop::new(cfg)?),
    })
}

enum Event {
    InitialReady,
    PredictionDone(PredictionRecord),
    StepBegin,
}

struct Predictor {
    free_at: Micros,
    latency: Micros,
}

impl Predictor {
    /// Queues a prediction behind any running one; returns its completion time.
    fn launch(&mut self, now: Micros) -> Micros {
        let start = now.max(self.free_at);
        self.free_at = start + self.latency;
        self.free_at
    }
}

/// Runs one episode in virtual time.
pub fn simulate<P, O>(
    cfg: &SchedulerConfig,
    tm: &TimingModel,
    mode: Mode,
    policy: &P,
    observations: &O,
) -> Result<(SimTrace, MetricsReport)>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    let cfg = prepare(cfg, tm, mode, policy)?;
    let exec_us = tm.execution_us();
    let mut predictor = Predictor {
        free_at: 0,
        latency: tm.prediction_us(),
    };
    let mut queue = EventQueue::new();

    let mut initial_ready = true;
    let mut initial = None;
    if has_initial_chunk(mode) {
        let done = predictor.launch(0);
        queue.schedule(done, Event::InitialReady);
        initial_ready = false;
        initial = Some(predict_ticket(policy, observations, INITIAL_TICKET)?.actions);
    }
    let mut scheduler = build_scheduler(&cfg, tm, initial)?;
    let startup_us = if mode == Mode::Teda {
        predictor.free_at
    } else {
        0
    };
    queue.schedule(startup_us, Event::StepBegin);

    let mut ready: Vec<PredictionRecord> = Vec::new();
    let mut waiting: Option<(StepPlan, Micros)> = None;
    let mut rows = Vec::with_capacity(cfg.episode_length);

    let mut launch =
        |queue: &mut EventQueue<Event>, now: Micros, ticket: LaunchTicket| -> Result<()> {
            let done = predictor.launch(now);
            let rec = predict_ticket(policy, observations, ticket)?;
            queue.schedule(done, Event::PredictionDone(rec));
            Ok(())
        };

    while let Some((now, event)) = queue.pop() {
        match event {
            Event::InitialReady => initial_ready = true,
            Event::PredictionDone(rec) => ready.push(rec),
            Event::StepBegin => {
                if let Some(plan) = scheduler.plan() {
                    if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::BeforeApply) {
                        launch(&mut queue, now, l.ticket)?;
                    }
                    waiting = Some((plan, now));
                }
            }
        }

        let Some((plan, begun)) = waiting else {
            continue;
        };
        if !initial_ready {
            continue;
        }
        let completed = match plan.commit {
            None => None,
            Some(ticket) => match ready.iter().position(|r| r.ticket() == ticket) {
                Some(i) => Some(ready.swap_remove(i)),
                None => continue,
            },
        };
        waiting = None;
        let out = scheduler.apply(completed)?;
        let end = now + exec_us;
        rows.push(TraceRow {
            step: out.step,
            wall_ns: end * 1000,
            stall_ns: (now - begun) * 1000,
            ensemble_size: out.ensemble_size,
            drops_cum: out.drops_cum,
            inflight: out.inflight,
            action: out.action,
        });
        if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::AfterApply) {
            launch(&mut queue, end, l.ticket)?;
        }
        queue.schedule(end, Event::StepBegin);
    }

    let last = match scheduler.outstanding() {
        Some(t) => ready
            .iter()
            .position(|r| r.ticket() == t)
            .map(|i| ready.swap_remove(i)),
        None => None,
    };
    scheduler.finish(last)?;

    let trace = SimTrace {
        mode,
        action_dim: cfg.action_dim,
        startup_ns: startup_us * 1000,
        rows,
        total_dropped: scheduler.ledger().total(),
        predictions: scheduler.predictions(),
    };
    let reference = policy.reference_trajectory(cfg.episode_length);
    let metrics = MetricsReport::from_trace(&trace, reference.as_deref());
    Ok((trace, metrics))
}

/// Runs all three modes on identical inputs.
pub fn compare<P, O>(
    cfg: &SchedulerConfig,
    tm: &TimingModel,
    policy: &P,
    observations: &O,
) -> Result<ComparisonReport>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    let run = |mode| simulate(cfg, tm, mode, policy, observations).map(|(_, m)| m);
    Ok(ComparisonReport::new(
        run(Mode::Teda)?,
        run(Mode::PerStepTe)?,
        run(Mode::OpenLoop)?,
    ))
}
