//! C interface to `teda-core`.
//!
//! Every function returns a [`TedaStatus`]. On failure a message is kept per
//! thread and can be read with [`teda_last_error`]. Schedulers are opaque
//! handles created by [`teda_scheduler_new`] and released with
//! [`teda_scheduler_free`]. Strings returned by the library are released with
//! [`teda_string_free`]. Panics never cross the boundary; they surface as
//! `TEDA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use teda_core::baselines::{OpenLoop, PerStepTe};
use teda_core::compressor::{dequantize, quantize, QuantizedTensor, Tensor};
use teda_core::config::RunConfig;
use teda_core::scheduler::{LaunchPhase, LaunchTicket, PredictionRecord, Scheduler};
use teda_core::sim::simulate;
use teda_core::{
    derive_schedule, ActionVector, Error, Mode, SchedulerConfig, TedaScheduler as Teda, TimingModel,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TedaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad length, bad UTF-8 or an unknown enum value.
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// The timings cannot keep every step covered for this chunk size.
    Infeasible = 4,
    /// A call out of order, or a chunk that does not fit the scheduler.
    Protocol = 5,
    EpisodeEnded = 6,
    Format = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TedaMode {
    Teda = 0,
    PerStepTe = 1,
    OpenLoop = 2,
}

fn mode_of(raw: u32) -> Result<Mode, Fail> {
    Ok(match raw {
        x if x == TedaMode::Teda as u32 => Mode::Teda,
        x if x == TedaMode::PerStepTe as u32 => Mode::PerStepTe,
        x if x == TedaMode::OpenLoop as u32 => Mode::OpenLoop,
        other => return Err(invalid(format!("unknown mode {other}"))),
    })
}

/// Episode parameters and latencies in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TedaConfig {
    /// A `TedaMode` value.
    pub mode: u32,
    pub chunk_size: usize,
    pub episode_length: usize,
    pub action_dim: usize,
    pub weight_decay: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TedaSchedule {
    pub drop_count: usize,
    pub max_predictions: usize,
    pub buffer_width: usize,
}

/// A prediction: buffer row, observation step, first usable step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TedaTicket {
    pub tp_index: usize,
    pub start_step: usize,
    pub completion_step: usize,
}

impl From<LaunchTicket> for TedaTicket {
    fn from(t: LaunchTicket) -> Self {
        Self {
            tp_index: t.tp_index,
            start_step: t.start_step,
            completion_step: t.completion_step,
        }
    }
}

/// What the next step needs. When `has_commit` is set, the chunk for
/// `commit` must be passed to `teda_scheduler_apply`. When `has_launch` is
/// set, the caller starts a prediction from the observation at
/// `launch.start_step`; `launch_after_apply` says whether it starts before or
/// after the step's action executes.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TedaStepPlan {
    pub done: bool,
    pub step: usize,
    pub has_commit: bool,
    pub commit: TedaTicket,
    pub has_launch: bool,
    pub launch: TedaTicket,
    pub launch_after_apply: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TedaStepOutput {
    pub step: usize,
    pub ensemble_size: usize,
    pub drops_cum: usize,
    pub inflight: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TedaStats {
    pub steps_done: usize,
    pub predictions: usize,
    pub total_dropped: usize,
    pub has_outstanding: bool,
    pub outstanding: TedaTicket,
}

/// Opaque scheduler handle.
pub struct TedaScheduler {
    inner: Box<dyn Scheduler>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TedaStatus {
    match e {
        Error::InvalidConfig(_) => TedaStatus::InvalidConfig,
        Error::Infeasible(_) => TedaStatus::Infeasible,
        Error::EpisodeEnded { .. } => TedaStatus::EpisodeEnded,
        Error::DimensionMismatch { .. }
        | Error::ChunkLength { .. }
        | Error::Protocol(_)
        | Error::BufferWrite { .. }
        | Error::EmptyEnsemble { .. } => TedaStatus::Protocol,
        Error::Format(_) | Error::Json(_) => TedaStatus::Format,
        Error::Io(_) => TedaStatus::Io,
        _ => TedaStatus::InvalidArgument,
    }
}

struct Fail(TedaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TedaStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(TedaStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any error for `teda_last_error`, and turns panics into
/// `TEDA_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TedaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TedaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TedaStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Splits `k * action_dim` row-major values into `k` actions.
fn chunk_from(values: &[f64], cfg: &SchedulerConfig) -> Result<Vec<ActionVector>, Fail> {
    let want = cfg.chunk_size * cfg.action_dim;
    if values.len() != want {
        return Err(Fail(
            TedaStatus::Protocol,
            format!(
                "chunk needs {want} values (k * action_dim), got {}",
                values.len()
            ),
        ));
    }
    Ok(values
        .chunks(cfg.action_dim)
        .map(|a| ActionVector::new(a.to_vec()))
        .collect::<Result<_, _>>()?)
}

fn parts(c: &TedaConfig) -> Result<(SchedulerConfig, TimingModel), Fail> {
    let cfg = SchedulerConfig {
        chunk_size: c.chunk_size,
        episode_length: c.episode_length,
        weight_decay: c.weight_decay,
        action_dim: c.action_dim,
        mode: mode_of(c.mode)?,
    };
    cfg.validate()?;
    Ok((cfg, TimingModel::new(c.t1, c.t2, c.t3, c.t4)?))
}

/// Library version as a static string. Never free it.
#[no_mangle]
pub extern "C" fn teda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call into the library on this
/// thread; do not free it.
#[no_mangle]
pub extern "C" fn teda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Drop count, buffer rows and buffer width for a TEDA episode.
///
/// # Safety
/// `config` and `out` must be null or valid for reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn teda_derive_schedule(
    config: *const TedaConfig,
    out_schedule: *mut TedaSchedule,
) -> TedaStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let dst = out(out_schedule, "out_schedule")?;
        let (cfg, tm) = parts(c)?;
        let s = derive_schedule(&cfg, &tm)?;
        *dst = TedaSchedule {
            drop_count: s.drop_count,
            max_predictions: s.max_predictions,
            buffer_width: s.buffer_width,
        };
        Ok(())
    })
}

/// Creates a scheduler. `initial` holds the chunk predicted from observation
/// 0 as `chunk_size * action_dim` row-major values; open-loop ignores it and
/// accepts null.
///
/// # Safety
/// Pointers must be null or valid; `initial` must hold `initial_len` values.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_new(
    config: *const TedaConfig,
    initial: *const f64,
    initial_len: usize,
    out_handle: *mut *mut TedaScheduler,
) -> TedaStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let dst = out(out_handle, "out_handle")?;
        let (cfg, tm) = parts(c)?;
        let inner: Box<dyn Scheduler> = match cfg.mode {
            Mode::OpenLoop => Box::new(OpenLoop::new(&cfg)?),
            Mode::PerStepTe => {
                let init = chunk_from(slice(initial, initial_len, "initial")?, &cfg)?;
                Box::new(PerStepTe::new(&cfg, init)?)
            }
            Mode::Teda => {
                let sched = derive_schedule(&cfg, &tm)?;
                let init = chunk_from(slice(initial, initial_len, "initial")?, &cfg)?;
                Box::new(Teda::new(&cfg, &sched, init)?)
            }
        };
        *dst = Box::into_raw(Box::new(TedaScheduler { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from `teda_scheduler_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_free(handle: *mut TedaScheduler) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Plan for the next step; `done` is set once the episode is over.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_plan(
    handle: *const TedaScheduler,
    out_plan: *mut TedaStepPlan,
) -> TedaStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let dst = out(out_plan, "out_plan")?;
        *dst = match h.inner.plan() {
            None => TedaStepPlan {
                done: true,
                ..Default::default()
            },
            Some(p) => TedaStepPlan {
                done: false,
                step: p.step,
                has_commit: p.commit.is_some(),
                commit: p.commit.map(Into::into).unwrap_or_default(),
                has_launch: p.launch.is_some(),
                launch: p.launch.map(|l| l.ticket.into()).unwrap_or_default(),
                launch_after_apply: p.launch.is_some_and(|l| l.phase == LaunchPhase::AfterApply),
            },
        };
        Ok(())
    })
}

/// Applies the planned step. `chunk` is the prediction named by the plan's
/// commit ticket (null with length 0 when there is none). The applied action
/// is written to `out_action`, which must hold `action_dim` values;
/// `out_step` may be null.
///
/// # Safety
/// Pointers must be null or valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_apply(
    handle: *mut TedaScheduler,
    chunk: *const f64,
    chunk_len: usize,
    out_action: *mut f64,
    out_action_len: usize,
    out_step: *mut TedaStepOutput,
) -> TedaStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        let dim = h.inner.config().action_dim;
        if out_action_len != dim {
            return Err(invalid(format!(
                "out_action holds {out_action_len} values, action_dim is {dim}"
            )));
        }
        let action = slice_mut(out_action, out_action_len, "out_action")?;
        let plan = h.inner.plan().ok_or(Error::EpisodeEnded {
            episode_length: h.inner.config().episode_length,
        })?;
        let completed = record(plan.commit, chunk, chunk_len, h.inner.config())?;
        let o = h.inner.apply(completed)?;
        action.copy_from_slice(o.action.values());
        if let Some(dst) = out_step.as_mut() {
            *dst = TedaStepOutput {
                step: o.step,
                ensemble_size: o.ensemble_size,
                drops_cum: o.drops_cum,
                inflight: o.inflight,
            };
        }
        Ok(())
    })
}

unsafe fn record(
    ticket: Option<LaunchTicket>,
    chunk: *const f64,
    len: usize,
    cfg: &SchedulerConfig,
) -> Result<Option<PredictionRecord>, Fail> {
    match ticket {
        Some(t) => Ok(Some(PredictionRecord::new(
            t,
            chunk_from(slice(chunk, len, "chunk")?, cfg)?,
        ))),
        None if chunk.is_null() && len == 0 => Ok(None),
        None => Err(Fail(
            TedaStatus::Protocol,
            "no prediction is due at this step".into(),
        )),
    }
}

/// Commits the prediction still outstanding after the last step (see
/// `teda_scheduler_stats`), for drop accounting. Pass null when there is none.
///
/// # Safety
/// Pointers must be null or valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_finish(
    handle: *mut TedaScheduler,
    chunk: *const f64,
    chunk_len: usize,
) -> TedaStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if h.inner.plan().is_some() {
            return Err(Fail(TedaStatus::Protocol, "episode is not over yet".into()));
        }
        let completed = record(h.inner.outstanding(), chunk, chunk_len, h.inner.config())?;
        h.inner.finish(completed)?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn teda_scheduler_stats(
    handle: *const TedaScheduler,
    out_stats: *mut TedaStats,
) -> TedaStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let dst = out(out_stats, "out_stats")?;
        let outstanding = h.inner.outstanding();
        *dst = TedaStats {
            steps_done: h.inner.steps_done(),
            predictions: h.inner.predictions(),
            total_dropped: h.inner.ledger().total(),
            has_outstanding: outstanding.is_some(),
            outstanding: outstanding.map(Into::into).unwrap_or_default(),
        };
        Ok(())
    })
}

/// Symmetric int16 quantization of `len` floats with one shared scale.
///
/// # Safety
/// `data` and `out_codes` must hold `len` elements; `out_scale` must be valid.
#[no_mangle]
pub unsafe extern "C" fn teda_quantize(
    data: *const f32,
    len: usize,
    out_codes: *mut i16,
    out_scale: *mut f64,
) -> TedaStatus {
    guard(|| {
        let src = slice(data, len, "data")?;
        let codes = slice_mut(out_codes, len, "out_codes")?;
        let scale = out(out_scale, "out_scale")?;
        let q = quantize(&Tensor::new([1, 1, 1, len], src.to_vec())?)?;
        codes.copy_from_slice(q.codes());
        *scale = q.scale();
        Ok(())
    })
}

/// # Safety
/// `codes` and `out_data` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn teda_dequantize(
    codes: *const i16,
    len: usize,
    scale: f64,
    out_data: *mut f32,
) -> TedaStatus {
    guard(|| {
        let src = slice(codes, len, "codes")?;
        let dst = slice_mut(out_data, len, "out_data")?;
        let q = QuantizedTensor::new([1, 1, 1, len], scale, src.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        dst.copy_from_slice(dequantize(&q).data());
        Ok(())
    })
}

/// Runs one virtual-time episode from a JSON run configuration and returns
/// the metrics as JSON. `mode` may be null to use the configuration's mode.
/// Relative model paths resolve against the working directory. Free the
/// result with `teda_string_free`.
///
/// # Safety
/// `config_json` and `mode` must be null or NUL-terminated; `out_json` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn teda_simulate_json(
    config_json: *const c_char,
    mode: *const c_char,
    out_json: *mut *mut c_char,
) -> TedaStatus {
    guard(|| {
        let text = string(config_json, "config_json")?;
        let dst = out(out_json, "out_json")?;
        let cfg = RunConfig::from_json(text)?;
        let mode = match mode.is_null() {
            true => cfg.mode,
            false => string(mode, "mode")?.parse()?,
        };
        let host = cfg.policy_host()?;
        let (_, m) = simulate(
            &cfg.scheduler_config(),
            &cfg.timing()?,
            mode,
            &host.policy,
            &*host.observations,
        )?;
        let json = serde_json::to_string(&m).map_err(Error::from)?;
        *dst = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn teda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
