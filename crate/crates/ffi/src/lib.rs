//! C ABI over the parablow solver.
//!
//! Every entry point returns a [`PbStatus`]; on failure the message is kept per
//! thread and can be read with [`pb_last_error_message`]. Simulations are opaque
//! handles created by `pb_simulation_new*` and released with
//! [`pb_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use parablow::analyzer::{fit_blowup, FitConfig, FitWindow, Verdict};
use parablow::diagnostics::{PointTrace, TraceRow};
use parablow::integrator::{HaltReason, Integrator, StepControl};
use parablow::io::RunConfig;
use parablow::oracle::{closed_form, integrate_reduced_at, OdeOptions, ReducedState, SingularTime};
use parablow::{Error, ModelParams, PeriodicGrid, State};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The requested quantity does not exist for these parameters.
    NotApplicable = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbHalt {
    /// `pb_simulation_run` has not been called yet.
    NotRun = 0,
    ReachedTEnd = 1,
    BlowupThreshold = 2,
    StepUnderflow = 3,
    NonFinite = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbVerdict {
    MatchesOracle = 0,
    BoundSatisfied = 1,
    Inconclusive = 2,
    Violation = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa0: f64,
    pub convective: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbStepControl {
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub stop_threshold: f64,
    pub sample_interval: f64,
}

/// One trace sample. `v` and `omega` hold the derivatives of orders 0..3 at x = 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbTraceRow {
    pub t: f64,
    pub e0: f64,
    pub e2: f64,
    pub l1_omega: f64,
    pub diss_v: f64,
    pub diss_omega: f64,
    pub v: [f64; 4],
    pub omega: [f64; 4],
    pub min_omega: f64,
    pub sym_odd: f64,
    pub sym_even: f64,
    pub spectral_tail: f64,
}

/// Set `window_start`/`window_end` to NaN for the trailing-decade window and
/// `reference_t0` to NaN when there is no reference singular time.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbFitConfig {
    pub window_start: f64,
    pub window_end: f64,
    pub rel_tol: f64,
    pub min_growth: f64,
    pub reference_t0: f64,
    /// The reference is an upper bound rather than the exact time.
    pub reference_is_bound: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbBlowupEstimate {
    pub t0_hat: f64,
    pub exponent_hat: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub residual: f64,
    pub samples: usize,
    pub verdict: PbVerdict,
}

/// Reduced point values. `singular_time` is NaN when none is known.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbReduced {
    pub v1: f64,
    pub omega2: f64,
    pub singular_time: f64,
    /// Whether the values come from an exact closed form.
    pub exact: bool,
}

pub struct PbSimulation {
    params: ModelParams,
    control: StepControl,
    grid: PeriodicGrid,
    dealias: bool,
    state: State,
    trace: PointTrace,
    halt: PbHalt,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> PbStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::InvalidGridSize(_)
        | Error::LengthMismatch { .. }
        | Error::NonFiniteField { .. }
        | Error::NegativeOmega { .. }
        | Error::UnsupportedExponent { .. }
        | Error::DegreeBudgetExceeded { .. }
        | Error::Config(_) => PbStatus::InvalidArgument,
        Error::NoClosedForm(_) | Error::NotApplicable(_) => PbStatus::NotApplicable,
        Error::NegativePower(_) | Error::InsufficientGrowth { .. } => PbStatus::Numerical,
        Error::Csv(_) | Error::Io { .. } => PbStatus::Io,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (PbStatus, String)>) -> PbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PbStatus::Panic
        }
    }
}

fn fail(err: Error) -> (PbStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (PbStatus, String) {
    (PbStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PbStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (PbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (PbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn model_params(p: &PbParams) -> Result<ModelParams, (PbStatus, String)> {
    ModelParams::new(p.alpha, p.beta, p.kappa0, p.convective).map_err(fail)
}

fn step_control(c: &PbStepControl) -> StepControl {
    StepControl {
        cfl: c.cfl,
        dt_min: c.dt_min,
        dt_max: c.dt_max,
        t_end: c.t_end,
        stop_threshold: c.stop_threshold,
        sample_interval: c.sample_interval,
        frozen_omega: false,
    }
}

fn halt_code(h: HaltReason) -> PbHalt {
    match h {
        HaltReason::ReachedTEnd => PbHalt::ReachedTEnd,
        HaltReason::BlowupThreshold => PbHalt::BlowupThreshold,
        HaltReason::StepUnderflow => PbHalt::StepUnderflow,
        HaltReason::NonFinite => PbHalt::NonFinite,
    }
}

fn verdict_code(v: Verdict) -> PbVerdict {
    match v {
        Verdict::MatchesOracle => PbVerdict::MatchesOracle,
        Verdict::BoundSatisfied => PbVerdict::BoundSatisfied,
        Verdict::Inconclusive => PbVerdict::Inconclusive,
        Verdict::Violation => PbVerdict::Violation,
    }
}

fn row_out(r: &TraceRow) -> PbTraceRow {
    PbTraceRow {
        t: r.t,
        e0: r.e0,
        e2: r.e2,
        l1_omega: r.l1_omega,
        diss_v: r.diss_v,
        diss_omega: r.diss_omega,
        v: r.v,
        omega: r.omega,
        min_omega: r.min_omega,
        sym_odd: r.sym_odd,
        sym_even: r.sym_even,
        spectral_tail: r.spectral_tail,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and returns its full length in bytes, excluding the NUL.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Default step control: cfl 0.25, dt in [1e-12, 1e-3], t_end 1, threshold 1e6,
/// sampling every 1e-3.
#[no_mangle]
pub extern "C" fn pb_step_control_default() -> PbStepControl {
    let d = StepControl::default();
    PbStepControl {
        cfl: d.cfl,
        dt_min: d.dt_min,
        dt_max: d.dt_max,
        t_end: d.t_end,
        stop_threshold: d.stop_threshold,
        sample_interval: d.sample_interval,
    }
}

/// Default fit settings: trailing-decade window, 2% tolerance, growth 10, no reference.
#[no_mangle]
pub extern "C" fn pb_fit_config_default() -> PbFitConfig {
    let d = FitConfig::default();
    PbFitConfig {
        window_start: f64::NAN,
        window_end: f64::NAN,
        rel_tol: d.rel_tol,
        min_growth: d.min_growth,
        reference_t0: f64::NAN,
        reference_is_bound: false,
    }
}

/// Creates a simulation from `n` nodal samples of `v` and `omega` on
/// `x_j = -pi + 2 pi j / n`, starting at t = 0.
///
/// # Safety
/// `params` and `control` must be valid pointers, `v` and `omega` valid for `n`
/// reads and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_new(
    params: *const PbParams,
    control: *const PbStepControl,
    n: usize,
    v: *const f64,
    omega: *const f64,
    dealias: bool,
    out: *mut *mut PbSimulation,
) -> PbStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let params = model_params(deref(params, "params")?)?;
        let control = step_control(deref(control, "control")?);
        control.validate().map_err(fail)?;
        let grid = PeriodicGrid::new(n).map_err(fail)?;
        let v = slice(v, n, "v")?.to_vec();
        let omega = slice(omega, n, "omega")?.to_vec();
        let state = State::new(&grid, 0.0, v, omega).map_err(fail)?;
        *out = Box::into_raw(Box::new(PbSimulation {
            params,
            control,
            grid,
            dealias,
            state,
            trace: PointTrace::default(),
            halt: PbHalt::NotRun,
        }));
        Ok(())
    })
}

/// Creates a simulation from a TOML run configuration, as accepted by the
/// `parablow run` command.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_from_toml(config_toml: *const c_char, out: *mut *mut PbSimulation) -> PbStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|e| (PbStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::from_toml_str(text).map_err(fail)?;
        let r = cfg.resolve().map_err(fail)?;
        *out = Box::into_raw(Box::new(PbSimulation {
            params: r.params,
            control: cfg.step,
            grid: r.grid,
            dealias: cfg.grid.dealias,
            state: r.initial,
            trace: PointTrace::default(),
            halt: PbHalt::NotRun,
        }));
        Ok(())
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `pb_simulation_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_free(sim: *mut PbSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Changes the end time for the next `pb_simulation_run`.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_set_t_end(sim: *mut PbSimulation, t_end: f64) -> PbStatus {
    guard(|| {
        let sim = deref_mut(sim, "sim")?;
        let control = StepControl { t_end, ..sim.control };
        control.validate().map_err(fail)?;
        sim.control = control;
        Ok(())
    })
}

/// Advances from the current state to `t_end` (or until a halt condition) and
/// appends the samples to the trace. A run after a halt other than reaching
/// `t_end` resumes from the halted state.
///
/// # Safety
/// `sim` must be a live handle; `halt` may be null.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_run(sim: *mut PbSimulation, halt: *mut PbHalt) -> PbStatus {
    guard(|| {
        let sim = deref_mut(sim, "sim")?;
        let mut integrator = Integrator::new(sim.params, sim.control, sim.grid, sim.dealias).map_err(fail)?;
        let outcome = integrator.run(sim.state.clone(), &mut []);
        let skip = usize::from(!sim.trace.is_empty());
        for row in outcome.trace.rows.into_iter().skip(skip) {
            sim.trace.push(row);
        }
        sim.state = outcome.final_state;
        sim.halt = halt_code(outcome.halt_reason);
        if let Some(h) = halt.as_mut() {
            *h = sim.halt;
        }
        Ok(())
    })
}

/// Why the last run stopped.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_halt(sim: *const PbSimulation) -> PbHalt {
    sim.as_ref().map_or(PbHalt::NotRun, |s| s.halt)
}

/// Number of trace samples recorded so far.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_trace_len(sim: *const PbSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.trace.len())
}

/// Copies trace sample `index`.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_trace_row(sim: *const PbSimulation, index: usize, out: *mut PbTraceRow) -> PbStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        let out = deref_mut(out, "out")?;
        let row = sim.trace.rows.get(index).ok_or_else(|| {
            (
                PbStatus::InvalidArgument,
                format!("trace index {index} out of range (len {})", sim.trace.len()),
            )
        })?;
        *out = row_out(row);
        Ok(())
    })
}

/// Grid size of the simulation.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_grid_size(sim: *const PbSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.grid.n())
}

/// Copies the current fields into `v` and `omega` (each `len >= n`) and the time
/// into `t`. Any of the outputs may be null.
///
/// # Safety
/// `sim` must be a live handle; non-null buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pb_simulation_state(
    sim: *const PbSimulation,
    v: *mut f64,
    omega: *mut f64,
    len: usize,
    t: *mut f64,
) -> PbStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        let n = sim.grid.n();
        if (!v.is_null() || !omega.is_null()) && len < n {
            return Err((PbStatus::BufferTooSmall, format!("buffer holds {len} values, grid has {n}")));
        }
        if !v.is_null() {
            ptr::copy_nonoverlapping(sim.state.v.as_ptr(), v, n);
        }
        if !omega.is_null() {
            ptr::copy_nonoverlapping(sim.state.omega.as_ptr(), omega, n);
        }
        if let Some(t) = t.as_mut() {
            *t = sim.state.time;
        }
        Ok(())
    })
}

/// Fits the blow-up law to the recorded trace.
///
/// # Safety
/// `sim` must be a live handle, `config` valid and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pb_fit_blowup(
    sim: *const PbSimulation,
    config: *const PbFitConfig,
    out: *mut PbBlowupEstimate,
) -> PbStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        let window = match (c.window_start.is_nan(), c.window_end.is_nan()) {
            (true, true) => FitWindow::LastDecade,
            _ => FitWindow::Range {
                start: if c.window_start.is_nan() { f64::NEG_INFINITY } else { c.window_start },
                end: if c.window_end.is_nan() { f64::INFINITY } else { c.window_end },
            },
        };
        let reference = match (c.reference_t0.is_nan(), c.reference_is_bound) {
            (true, _) => SingularTime::None,
            (false, false) => SingularTime::Exact(c.reference_t0),
            (false, true) => SingularTime::AtMost(c.reference_t0),
        };
        let cfg = FitConfig {
            window,
            rel_tol: c.rel_tol,
            min_growth: c.min_growth,
            reference,
        };
        let est = fit_blowup(&sim.trace, &cfg).map_err(fail)?;
        *out = PbBlowupEstimate {
            t0_hat: est.t0_hat,
            exponent_hat: est.exponent_hat,
            window_start: est.fit_window.0,
            window_end: est.fit_window.1,
            residual: est.residual,
            samples: est.samples,
            verdict: verdict_code(est.verdict),
        };
        Ok(())
    })
}

/// Reduced values `(V^(1), Omega^(2))` at time `t` from `(v1, omega2)` at t = 0.
/// Uses the closed form when one exists and numerical integration otherwise.
///
/// # Safety
/// `params` must be valid and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pb_oracle_reduced(
    params: *const PbParams,
    v1: f64,
    omega2: f64,
    t: f64,
    out: *mut PbReduced,
) -> PbStatus {
    guard(|| {
        let params = model_params(deref(params, "params")?)?;
        let out = deref_mut(out, "out")?;
        let init = ReducedState::new(0.0, v1, omega2);
        let cf = closed_form(&params, &init);
        let singular_time = cf
            .as_ref()
            .ok()
            .and_then(|cf| cf.singular_time.time())
            .unwrap_or(f64::NAN);
        *out = match cf {
            Ok(cf) if cf.is_exact() => {
                let (v, w) = cf.evaluate(t);
                PbReduced {
                    v1: v,
                    omega2: w,
                    singular_time,
                    exact: true,
                }
            }
            _ => {
                let s = integrate_reduced_at(&params, &init, &[t], &OdeOptions::default()).map_err(fail)?;
                let r = s.points.last().copied().filter(|p| p.t >= t).ok_or_else(|| {
                    (PbStatus::Numerical, format!("reduced system blows up before t = {t}"))
                })?;
                PbReduced {
                    v1: r.v1,
                    omega2: r.omega2,
                    singular_time,
                    exact: false,
                }
            }
        };
        Ok(())
    })
}
