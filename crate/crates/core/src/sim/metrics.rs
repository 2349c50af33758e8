use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{ActionVector, Mode};

/// One applied step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Time the step's action finished executing, since the episode started.
    pub wall_ns: u64,
    /// Time the executor spent waiting for a prediction before this step.
    pub stall_ns: u64,
    pub ensemble_size: usize,
    pub drops_cum: usize,
    pub inflight: bool,
    pub action: ActionVector,
}

impl TraceRow {
    pub fn wall_time_s(&self) -> f64 {
        self.wall_ns as f64 / 1e9
    }

    pub fn stall_s(&self) -> f64 {
        self.stall_ns as f64 / 1e9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub mode: Mode,
    pub action_dim: usize,
    /// Time spent producing the first chunk before step 1 could start.
    pub startup_ns: u64,
    pub rows: Vec<TraceRow>,
    pub total_dropped: usize,
    pub predictions: usize,
}

impl SimTrace {
    pub fn trajectory(&self) -> Vec<ActionVector> {
        self.rows.iter().map(|r| r.action.clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(
            out,
            "step,wall_time_s,ensemble_size,drops_cum,stall_s,inflight"
        )?;
        for d in 0..self.action_dim {
            write!(out, ",a{d}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{}",
                r.step,
                r.wall_time_s(),
                r.ensemble_size,
                r.drops_cum,
                r.stall_s(),
                u8::from(r.inflight)
            )?;
            for v in r.action.values() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: Mode,
    pub steps: usize,
    /// Steady-state time per step: `(total - startup) / T_a`.
    pub per_step_s: f64,
    pub total_wall_time_s: f64,
    pub startup_overhead_s: f64,
    /// Largest gap between two consecutive applied actions.
    pub max_inter_action_gap_s: f64,
    pub total_dropped_actions: usize,
    pub predictions: usize,
    pub mean_ensemble_size: f64,
    pub max_ensemble_size: usize,
    pub stalled_steps: usize,
    pub deadline_misses: usize,
    /// Max over steps and dimensions of `|a[t+1] - 2 a[t] + a[t-1]|`.
    pub jitter: f64,
    pub trajectory_rmse: Option<f64>,
}

impl MetricsReport {
    pub fn from_trace(trace: &SimTrace, reference: Option<&[ActionVector]>) -> Self {
        let rows = &trace.rows;
        let steps = rows.len();
        let total_ns = rows.last().map_or(trace.startup_ns, |r| r.wall_ns);
        let per_step_s = if steps == 0 {
            0.0
        } else {
            (total_ns - trace.startup_ns) as f64 / steps as f64 / 1e9
        };
        let max_gap_ns = if steps == 1 {
            rows[0].wall_ns - trace.startup_ns
        } else {
            rows.windows(2)
                .map(|w| w[1].wall_ns - w[0].wall_ns)
                .max()
                .unwrap_or(0)
        };
        let sizes = rows.iter().map(|r| r.ensemble_size);
        let traj = trace.trajectory();
        Self {
            mode: trace.mode,
            steps,
            per_step_s,
            total_wall_time_s: total_ns as f64 / 1e9,
            startup_overhead_s: trace.startup_ns as f64 / 1e9,
            max_inter_action_gap_s: max_gap_ns as f64 / 1e9,
            total_dropped_actions: trace.total_dropped,
            predictions: trace.predictions,
            mean_ensemble_size: if steps == 0 {
                0.0
            } else {
                sizes.clone().sum::<usize>() as f64 / steps as f64
            },
            max_ensemble_size: sizes.max().unwrap_or(0),
            stalled_steps: rows.iter().filter(|r| r.stall_ns > 0).count(),
            deadline_misses: 0,
            jitter: jitter(&traj),
            trajectory_rmse: reference.map(|g| rmse(&traj, g)),
        }
    }
}

pub fn jitter(trajectory: &[ActionVector]) -> f64 {
    trajectory
        .windows(3)
        .flat_map(|w| (0..w[1].dim()).map(move |d| (w[2][d] - 2.0 * w[1][d] + w[0][d]).abs()))
        .fold(0.0, f64::max)
}

/// Root mean square difference over all steps and dimensions. The shorter
/// of the two sequences bounds the comparison.
pub fn rmse(trajectory: &[ActionVector], reference: &[ActionVector]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, g) in trajectory.iter().zip(reference) {
        for (x, y) in a.values().iter().zip(g.values()) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Improvement of TEDA over one baseline. Ratios are `None` when the TEDA
/// side is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub baseline: Mode,
    /// `baseline.per_step_s / teda.per_step_s`
    pub speedup: Option<f64>,
    /// `baseline.max_inter_action_gap_s / teda.max_inter_action_gap_s`
    pub gap_ratio: Option<f64>,
    /// `baseline.jitter / teda.jitter`
    pub jitter_ratio: Option<f64>,
}

impl Delta {
    pub fn between(teda: &MetricsReport, baseline: &MetricsReport) -> Self {
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        Self {
            baseline: baseline.mode,
            speedup: ratio(baseline.per_step_s, teda.per_step_s),
            gap_ratio: ratio(baseline.max_inter_action_gap_s, teda.max_inter_action_gap_s),
            jitter_ratio: ratio(baseline.jitter, teda.jitter),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub teda: MetricsReport,
    pub per_step_te: MetricsReport,
    pub open_loop: MetricsReport,
    pub vs_per_step_te: Delta,
    pub vs_open_loop: Delta,
}

impl ComparisonReport {
    pub fn new(teda: MetricsReport, per_step_te: MetricsReport, open_loop: MetricsReport) -> Self {
        let vs_per_step_te = Delta::between(&teda, &per_step_te);
        let vs_open_loop = Delta::between(&teda, &open_loop);
        Self {
            teda,
            per_step_te,
            open_loop,
            vs_per_step_te,
            vs_open_loop,
        }
    }

    pub fn modes(&self) -> [&MetricsReport; 3] {
        [&self.teda, &self.per_step_te, &self.open_loop]
    }

    /// Fixed-width text summary.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut s = format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8} {:>10}\n",
            "mode", "per_step_s", "total_s", "startup_s", "max_gap_s", "drops", "ens_max", "jitter"
        );
        for m in self.modes() {
            s.push_str(&format!(
                "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8} {:>10.3e}\n",
                m.mode.as_str(),
                m.per_step_s,
                m.total_wall_time_s,
                m.startup_overhead_s,
                m.max_inter_action_gap_s,
                m.total_dropped_actions,
                m.max_ensemble_size,
                m.jitter
            ));
        }
        for d in [&self.vs_per_step_te, &self.vs_open_loop] {
            s.push_str(&format!(
                "teda vs {:<12} speedup {:>7}  gap ratio {:>7}  jitter ratio {:>7}\n",
                d.baseline.as_str(),
                opt(d.speedup),
                opt(d.gap_ratio),
                opt(d.jitter_ratio)
            ));
        }
        s
    }
}
