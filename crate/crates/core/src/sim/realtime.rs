use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use super::{
    build_scheduler, has_initial_chunk, prepare, simulate, MetricsReport, SimTrace, TraceRow,
    INITIAL_TICKET,
};
use crate::error::{Error, Result};
use crate::policy::{ObservationSource, Policy};
use crate::scheduler::{predict_ticket, LaunchPhase, LaunchTicket, PredictionRecord};
use crate::types::{Mode, SchedulerConfig, TimingModel};

/// Extra wait tolerated beyond the modeled stall before a step counts as a
/// deadline miss.
const MISS_SLACK: Duration = Duration::from_millis(2);

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        thread::sleep(deadline - now);
    }
}

struct Inbox {
    rx: Receiver<Result<PredictionRecord>>,
    early: Vec<PredictionRecord>,
}

impl Inbox {
    fn wait_for(&mut self, ticket: LaunchTicket) -> Result<PredictionRecord> {
        loop {
            if let Some(i) = self.early.iter().position(|r| r.ticket() == ticket) {
                return Ok(self.early.swap_remove(i));
            }
            match self.rx.recv() {
                Ok(rec) => self.early.push(rec?),
                Err(_) => {
                    return Err(Error::Protocol(
                        "predictor stopped before delivering".into(),
                    ))
                }
            }
        }
    }
}

/// Runs one episode against the host clock with a dedicated predictor
/// thread. The executor ticks every `t3 + t4`; the predictor holds each
/// prediction for at least `t1 + t2`. A commit that arrives late stalls the
/// executor and is counted as a deadline miss; it never changes which
/// actions are applied, so the trajectory is the virtual-time one.
pub fn run_realtime<P, O>(
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
    // modeled stalls, to tell scheduled waits from missed deadlines
    let (modeled, _) = simulate(&cfg, tm, mode, policy, observations)?;
    let pred = Duration::from_micros(tm.prediction_us());
    let exec = Duration::from_micros(tm.execution_us());

    let (req_tx, req_rx) = mpsc::channel::<LaunchTicket>();
    let (res_tx, res_rx) = mpsc::channel::<Result<PredictionRecord>>();

    thread::scope(|s| {
        // owned here so an early return hangs up the predictor before the join
        let req_tx = req_tx;
        s.spawn(move || {
            for ticket in req_rx {
                let started = Instant::now();
                let rec = predict_ticket(policy, observations, ticket);
                sleep_until(started + pred);
                if res_tx.send(rec).is_err() {
                    break;
                }
            }
        });

        let send = |ticket| {
            req_tx
                .send(ticket)
                .map_err(|_| Error::Protocol("predictor thread exited".into()))
        };
        let mut inbox = Inbox {
            rx: res_rx,
            early: Vec::new(),
        };

        let t0 = Instant::now();
        let mut initial = None;
        if has_initial_chunk(mode) {
            send(INITIAL_TICKET)?;
            initial = Some(inbox.wait_for(INITIAL_TICKET)?.actions);
        }
        let mut scheduler = build_scheduler(&cfg, tm, initial)?;
        let (startup, mut next_begin) = if mode == Mode::Teda {
            let now = Instant::now();
            (now - t0, now)
        } else {
            (Duration::ZERO, t0)
        };

        let mut rows = Vec::with_capacity(cfg.episode_length);
        let mut misses = 0;
        while let Some(plan) = scheduler.plan() {
            sleep_until(next_begin);
            let begun = next_begin;
            if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::BeforeApply) {
                send(l.ticket)?;
            }
            let completed = match plan.commit {
                Some(t) => Some(inbox.wait_for(t)?),
                None => None,
            };
            let now = Instant::now();
            // waking up a little late is not a stall
            let apply_at = if now > begun + MISS_SLACK { now } else { begun };
            let stall = apply_at - begun;
            let modeled_stall = modeled.rows.get(rows.len()).map_or(0, |r| r.stall_ns);
            if stall.as_nanos() as u64 > modeled_stall + MISS_SLACK.as_nanos() as u64 {
                misses += 1;
            }

            let out = scheduler.apply(completed)?;
            sleep_until(apply_at + exec);
            let wall = t0.elapsed();
            if let Some(l) = plan.launch.filter(|l| l.phase == LaunchPhase::AfterApply) {
                send(l.ticket)?;
            }
            rows.push(TraceRow {
                step: out.step,
                wall_ns: wall.as_nanos() as u64,
                stall_ns: stall.as_nanos() as u64,
                ensemble_size: out.ensemble_size,
                drops_cum: out.drops_cum,
                inflight: out.inflight,
                action: out.action,
            });
            next_begin = apply_at + exec;
        }

        let last = match scheduler.outstanding() {
            Some(t) => Some(inbox.wait_for(t)?),
            None => None,
        };
        scheduler.finish(last)?;
        drop(req_tx);

        let trace = SimTrace {
            mode,
            action_dim: cfg.action_dim,
            startup_ns: startup.as_nanos() as u64,
            rows,
            total_dropped: scheduler.ledger().total(),
            predictions: scheduler.predictions(),
        };
        let reference = policy.reference_trajectory(cfg.episode_length);
        let mut metrics = MetricsReport::from_trace(&trace, reference.as_deref());
        metrics.deadline_misses = misses;
        Ok((trace, metrics))
    })
}
