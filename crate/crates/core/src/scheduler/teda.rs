use std::collections::VecDeque;

use super::{
    check_record, run_logical, DropLedger, EnsembleBuffer, EpisodeResult, Launch, LaunchPhase,
    LaunchTicket, PredictionRecord, Scheduler, StepOutput, StepPlan,
};
use crate::error::{Error, Result};
use crate::policy::{check_chunk, Observation, ObservationSource, Policy};
use crate::types::{
    ensemble_weights, weighted_apply, ActionVector, DerivedSchedule, Mode, SchedulerConfig,
};

/// Temporal ensemble with dropped actions.
///
/// A prediction is launched every `D` steps (at `t = 1, 1+D, 1+2D, ...`) from
/// the observation at its launch step `s`. Its chunk targets steps
/// `s .. s+k`, but it only completes at `s + D`, so the `D` actions for steps
/// `s .. s+D` are dropped and the rest are committed into buffer row `t_p`.
/// Every step applies the weighted mean of all live actions in its column,
/// oldest row first. The initial chunk (row 0, targets `0..k`) is available
/// before step 1.
#[derive(Debug, Clone)]
pub struct TedaScheduler {
    cfg: SchedulerConfig,
    drop_count: usize,
    buffer: EnsembleBuffer,
    steps_done: usize,
    launches: usize,
    staged_initial: Option<Vec<ActionVector>>,
    in_flight: VecDeque<LaunchTicket>,
    ledger: DropLedger,
    // results computed by `step` and not yet committed
    held: VecDeque<PredictionRecord>,
}

impl TedaScheduler {
    pub fn new(
        cfg: &SchedulerConfig,
        sched: &DerivedSchedule,
        initial: Vec<ActionVector>,
    ) -> Result<Self> {
        cfg.validate()?;
        if sched.drop_count == 0 {
            return Err(Error::InvalidConfig("drop count must be >= 1".into()));
        }
        check_chunk(&initial, cfg.chunk_size, cfg.action_dim)?;
        Ok(Self {
            cfg: cfg.clone(),
            drop_count: sched.drop_count,
            buffer: EnsembleBuffer::new(sched.max_predictions, sched.buffer_width),
            steps_done: 0,
            launches: 0,
            staged_initial: Some(initial),
            in_flight: VecDeque::new(),
            ledger: DropLedger::default(),
            held: VecDeque::new(),
        })
    }

    pub fn drop_count(&self) -> usize {
        self.drop_count
    }

    pub fn buffer(&self) -> &EnsembleBuffer {
        &self.buffer
    }

    /// Predictions launched since the initial one.
    pub fn launches(&self) -> usize {
        self.launches
    }

    fn is_launch_step(&self, t: usize) -> bool {
        // `t % D == 1`, read as true at every step when D == 1
        (t - 1).is_multiple_of(self.drop_count)
    }

    fn commit(&mut self, rec: PredictionRecord) -> Result<()> {
        let dropped = rec
            .actions
            .len()
            .min(rec.completion_step.saturating_sub(rec.start_step));
        self.buffer.write_row(
            rec.tp_index,
            rec.start_step,
            rec.completion_step,
            rec.actions,
        )?;
        self.ledger.record(rec.tp_index, dropped);
        Ok(())
    }

    /// One execution step with the policy evaluated inline. The prediction
    /// launched here is held until its completion step.
    pub fn step<P: Policy + ?Sized>(
        &mut self,
        observation: &Observation,
        policy: &P,
    ) -> Result<StepOutput> {
        let plan = self.plan().ok_or(Error::EpisodeEnded {
            episode_length: self.cfg.episode_length,
        })?;
        let completed = match plan.commit {
            Some(_) => self.held.pop_front(),
            None => None,
        };
        let out = self.apply(completed)?;
        if let Some(l) = plan.launch {
            let actions = policy.predict(observation, l.ticket.start_step)?;
            check_chunk(&actions, self.cfg.chunk_size, self.cfg.action_dim)?;
            self.held
                .push_back(PredictionRecord::new(l.ticket, actions));
        }
        Ok(out)
    }

    /// Commits whatever [`step`](Self::step) still holds once the episode is over.
    pub fn finish_held(&mut self) -> Result<()> {
        let held = self.held.pop_front();
        self.finish(held)
    }
}

impl Scheduler for TedaScheduler {
    fn mode(&self) -> Mode {
        Mode::Teda
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
        let launching = self.is_launch_step(t);
        let commit = if launching && t > 1 {
            self.in_flight.front().copied()
        } else {
            None
        };
        let launch = launching.then(|| Launch {
            ticket: LaunchTicket {
                tp_index: self.launches + 1,
                start_step: t,
                completion_step: t + self.drop_count,
            },
            phase: LaunchPhase::BeforeApply,
        });
        Some(StepPlan {
            step: t,
            commit,
            launch,
        })
    }

    fn apply(&mut self, completed: Option<PredictionRecord>) -> Result<StepOutput> {
        let plan = self.plan().ok_or(Error::EpisodeEnded {
            episode_length: self.cfg.episode_length,
        })?;
        check_record(plan.commit, completed.as_ref(), &self.cfg)?;
        let t = plan.step;

        if let Some(initial) = self.staged_initial.take() {
            self.buffer.write_row(0, 0, 0, initial)?;
            self.ledger.record(0, 0);
        }
        if let Some(l) = plan.launch {
            self.in_flight.push_back(l.ticket);
            self.launches += 1;
        }
        if let Some(rec) = completed {
            self.in_flight.pop_front();
            self.commit(rec)?;
        }

        let column = self.buffer.column(t);
        if column.is_empty() {
            return Err(Error::EmptyEnsemble { step: t });
        }
        let actions: Vec<&ActionVector> = column.iter().map(|(_, a)| *a).collect();
        let action = weighted_apply(
            &actions,
            &ensemble_weights(actions.len(), self.cfg.weight_decay),
        )?;

        self.steps_done = t;
        Ok(StepOutput {
            step: t,
            action,
            ensemble_size: actions.len(),
            drops_cum: self.ledger.total(),
            inflight: !self.in_flight.is_empty(),
        })
    }

    fn outstanding(&self) -> Option<LaunchTicket> {
        if self.steps_done < self.cfg.episode_length {
            return None;
        }
        self.in_flight.front().copied()
    }

    fn finish(&mut self, completed: Option<PredictionRecord>) -> Result<()> {
        if self.steps_done < self.cfg.episode_length {
            return Err(Error::Protocol(format!(
                "finish called after {} of {} steps",
                self.steps_done, self.cfg.episode_length
            )));
        }
        check_record(self.outstanding(), completed.as_ref(), &self.cfg)?;
        if let Some(rec) = completed {
            self.in_flight.pop_front();
            self.commit(rec)?;
        }
        Ok(())
    }

    fn ledger(&self) -> &DropLedger {
        &self.ledger
    }

    fn predictions(&self) -> usize {
        1 + self.launches
    }
}

/// Runs a full TEDA episode, computing the initial chunk from observation 0.
pub fn run_episode<P, O>(
    cfg: &SchedulerConfig,
    sched: &DerivedSchedule,
    policy: &P,
    observations: &O,
) -> Result<EpisodeResult>
where
    P: Policy + ?Sized,
    O: ObservationSource + ?Sized,
{
    check_policy(cfg, policy)?;
    let initial = policy.predict(&observations.observe(0)?, 0)?;
    run_logical(
        TedaScheduler::new(cfg, sched, initial)?,
        policy,
        observations,
    )
}

pub(crate) fn check_policy<P: Policy + ?Sized>(cfg: &SchedulerConfig, policy: &P) -> Result<()> {
    if policy.chunk_size() != cfg.chunk_size {
        return Err(Error::InvalidConfig(format!(
            "policy chunk size {} differs from configured k = {}",
            policy.chunk_size(),
            cfg.chunk_size
        )));
    }
    if policy.action_dim() != cfg.action_dim {
        return Err(Error::InvalidConfig(format!(
            "policy action dim {} differs from configured {}",
            policy.action_dim(),
            cfg.action_dim
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{
        HashedPolicy, NoObservations, ScriptedPolicy, Staleness, TargetTrajectory,
    };
    use crate::types::DEFAULT_WEIGHT_DECAY;

    fn cfg(k: usize, t_a: usize) -> SchedulerConfig {
        SchedulerConfig {
            chunk_size: k,
            episode_length: t_a,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            action_dim: 1,
            mode: Mode::Teda,
        }
    }

    fn initial(k: usize, base: f64) -> Vec<ActionVector> {
        (0..k)
            .map(|j| ActionVector::splat(1, base + j as f64))
            .collect()
    }

    #[test]
    fn init_allocates_buffer() {
        let s = DerivedSchedule::from_drop_count(25, 120, 3);
        let sch = TedaScheduler::new(&cfg(25, 120), &s, initial(25, 0.0)).unwrap();
        assert_eq!((sch.buffer().rows(), sch.buffer().cols()), (41, 143));
        assert_eq!(sch.buffer().rows_used(), 0);
        assert_eq!(sch.steps_done(), 0);
        assert_eq!(sch.launches(), 0);
    }

    #[test]
    fn degenerate_buffer() {
        let s = DerivedSchedule::from_drop_count(1, 1, 1);
        let sch = TedaScheduler::new(&cfg(1, 1), &s, initial(1, 0.0)).unwrap();
        assert_eq!((sch.buffer().rows(), sch.buffer().cols()), (2, 2));
    }

    #[test]
    fn rejects_short_initial_chunk() {
        let s = DerivedSchedule::from_drop_count(25, 120, 3);
        let err = TedaScheduler::new(&cfg(25, 120), &s, initial(24, 0.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::ChunkLength {
                expected: 25,
                actual: 24
            }
        ));
    }

    #[test]
    fn first_step_is_singleton_from_initial_chunk() {
        let s = DerivedSchedule::from_drop_count(25, 120, 3);
        let mut sch = TedaScheduler::new(&cfg(25, 120), &s, initial(25, 100.0)).unwrap();
        let policy = HashedPolicy {
            chunk_size: 25,
            action_dim: 1,
            seed: 1,
        };
        let out = sch.step(&Observation::default(), &policy).unwrap();
        assert_eq!(out.ensemble_size, 1);
        // initial chunk entry targeting step 1
        assert_eq!(out.action[0], 101.0);
        assert!(out.inflight);
    }

    #[test]
    fn hand_trace_d3() {
        // k = 25, D = 3: the launch at t = 1 completes at t = 4, dropping its
        // actions for steps 1, 2, 3
        let s = DerivedSchedule::from_drop_count(25, 120, 3);
        let c = cfg(25, 120);
        let policy = HashedPolicy {
            chunk_size: 25,
            action_dim: 1,
            seed: 7,
        };
        let init = initial(25, 0.0);
        let mut sch = TedaScheduler::new(&c, &s, init.clone()).unwrap();
        let mut outs = Vec::new();
        for _ in 0..6 {
            outs.push(sch.step(&Observation::default(), &policy).unwrap());
        }
        assert_eq!(
            outs.iter().map(|o| o.ensemble_size).collect::<Vec<_>>(),
            vec![1, 1, 1, 2, 2, 2]
        );
        assert_eq!(outs[3].drops_cum, 3);
        assert_eq!(sch.ledger().entries(), &[(0, 0), (1, 3)]);
        for t in 1..4 {
            assert!(matches!(
                sch.buffer().cell(1, t),
                super::super::Cell::Dropped(_)
            ));
        }

        let row1 = policy.predict(&Observation::default(), 1).unwrap();
        let w = ensemble_weights(2, DEFAULT_WEIGHT_DECAY);
        // row 1's action for step 4 is at lookahead 3
        let expected = (w[0] * init[4][0] + w[1] * row1[3][0]) / (w[0] + w[1]);
        assert!((outs[3].action[0] - expected).abs() < 1e-15);
        assert_eq!(outs[0].action[0], init[1][0]);
        assert_eq!(outs[2].action[0], init[3][0]);
    }

    #[test]
    fn plan_sequence() {
        let s = DerivedSchedule::from_drop_count(10, 7, 3);
        let mut sch = TedaScheduler::new(&cfg(10, 7), &s, initial(10, 0.0)).unwrap();
        let policy = HashedPolicy {
            chunk_size: 10,
            action_dim: 1,
            seed: 0,
        };
        let mut launches = Vec::new();
        let mut commits = Vec::new();
        while let Some(plan) = sch.plan() {
            if let Some(l) = plan.launch {
                launches.push(l.ticket.start_step);
            }
            if let Some(c) = plan.commit {
                commits.push((plan.step, c.start_step));
            }
            sch.step(&Observation::default(), &policy).unwrap();
        }
        assert_eq!(launches, vec![1, 4, 7]);
        assert_eq!(commits, vec![(4, 1), (7, 4)]);
        assert_eq!(sch.outstanding().map(|t| t.start_step), Some(7));
        sch.finish_held().unwrap();
        assert_eq!(sch.ledger().total(), 9);
        assert!(sch.step(&Observation::default(), &policy).is_err());
    }

    #[test]
    fn apply_rejects_wrong_or_missing_commit() {
        let s = DerivedSchedule::from_drop_count(6, 10, 2);
        let c = cfg(6, 10);
        let mut sch = TedaScheduler::new(&c, &s, initial(6, 0.0)).unwrap();
        sch.apply(None).unwrap(); // t = 1 launches
        sch.apply(None).unwrap(); // t = 2
        assert!(
            sch.apply(None).is_err(),
            "t = 3 must commit the launch from t = 1"
        );
        let wrong = LaunchTicket {
            tp_index: 5,
            start_step: 1,
            completion_step: 3,
        };
        assert!(sch
            .apply(Some(PredictionRecord::new(wrong, initial(6, 0.0))))
            .is_err());
        let right = sch.plan().unwrap().commit.unwrap();
        assert!(sch
            .apply(Some(PredictionRecord::new(right, initial(5, 0.0))))
            .is_err());
        sch.apply(Some(PredictionRecord::new(right, initial(6, 0.0))))
            .unwrap();
    }

    #[test]
    fn empty_column_is_a_fault() {
        // k = 4 < 2*D = 6 leaves steps 5 and 6 uncovered
        let s = DerivedSchedule::from_drop_count(4, 10, 3);
        let c = cfg(4, 10);
        let policy = HashedPolicy {
            chunk_size: 4,
            action_dim: 1,
            seed: 3,
        };
        let err = run_episode(&c, &s, &policy, &NoObservations).unwrap_err();
        assert!(matches!(err, Error::EmptyEnsemble { step: 5 }), "{err}");
    }

    #[test]
    fn launches_match_row_count() {
        let c = cfg(25, 120);
        let s = DerivedSchedule::from_drop_count(25, 120, 3);
        let policy = ScriptedPolicy::new(
            25,
            TargetTrajectory::Constant { value: vec![0.5] },
            Staleness::Zero,
        )
        .unwrap();
        let r = run_episode(&c, &s, &policy, &NoObservations).unwrap();
        assert_eq!(r.predictions, 41);
        assert_eq!(r.ledger.total(), 3 * 40);
        assert!(r.trajectory().iter().all(|a| a[0] == 0.5));
        assert!(r.ensemble_sizes().iter().all(|&n| (1..=9).contains(&n)));
    }
}
