//! Classical RK4 in time with a diffusive step limit.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_report, record_trace, EnergyReport, PointTrace, TraceRow};
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, Spectral};
use crate::model::{pow_clamped, ModelParams, RhsWorkspace, State};

const EPS_DT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Halt once `|omega_xx(t, 0)|` exceeds this.
    pub stop_threshold: f64,
    pub sample_interval: f64,
    /// Freeze omega and drop its equation; `v` then solves a linear heat equation.
    pub frozen_omega: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl: 0.25,
            dt_min: 1e-12,
            dt_max: 1e-3,
            t_end: 1.0,
            stop_threshold: 1e6,
            sample_interval: 1e-3,
            frozen_omega: false,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", "must lie in (0, 1]");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return bad("dt_min", "need 0 < dt_min <= dt_max < inf");
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end", "must be finite and non-negative");
        }
        if !(self.stop_threshold > 0.0) {
            return bad("stop_threshold", "must be positive");
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HaltReason {
    ReachedTEnd,
    BlowupThreshold,
    StepUnderflow,
    NonFinite,
}

impl HaltReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltReason::ReachedTEnd => "ReachedTEnd",
            HaltReason::BlowupThreshold => "BlowupThreshold",
            HaltReason::StepUnderflow => "StepUnderflow",
            HaltReason::NonFinite => "NonFinite",
        }
    }
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub final_state: State,
    pub halt_reason: HaltReason,
    pub trace: PointTrace,
    pub diagnostics: Vec<EnergyReport>,
    pub steps: usize,
}

/// Called at every sample with the state and its diagnostics.
pub trait Observer {
    fn observe(&mut self, state: &State, report: &EnergyReport);
}

impl<F: FnMut(&State, &EnergyReport)> Observer for F {
    fn observe(&mut self, state: &State, report: &EnergyReport) {
        self(state, report)
    }
}

/// Stability-limited step: `cfl dx^2 / (max(kappa0 omega^beta + omega^alpha) + eps)`,
/// also `cfl dx / max|v|` with convection, capped by `dt_max`.
pub fn stable_dt(params: &ModelParams, grid: &PeriodicGrid, state: &State, control: &StepControl) -> f64 {
    let (diff, vmax) = coefficient_bounds(params, &state.v, state.omega.iter().copied());
    limit_dt(params, grid, control, diff, vmax)
}

fn coefficient_bounds(
    params: &ModelParams,
    v: &[f64],
    omega: impl Iterator<Item = f64>,
) -> (f64, f64) {
    let (alpha, beta, kappa0) = (params.alpha(), params.beta(), params.kappa0());
    let diff = omega.fold(0.0_f64, |m, w| {
        m.max(kappa0 * pow_clamped(w, beta) + pow_clamped(w, alpha))
    });
    let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    (diff, vmax)
}

fn limit_dt(params: &ModelParams, grid: &PeriodicGrid, control: &StepControl, diff: f64, vmax: f64) -> f64 {
    let dx = grid.spacing();
    let mut dt = control.cfl * dx * dx / (diff + EPS_DT);
    if params.convective() && vmax > 0.0 {
        dt = dt.min(control.cfl * dx / vmax);
    }
    dt.min(control.dt_max)
}

/// RK4 stage buffers for a pair of fields.
#[derive(Debug, Clone)]
struct Rk4 {
    acc: [Vec<f64>; 2],
    k: [Vec<f64>; 2],
    stage: [Vec<f64>; 2],
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = || [vec![0.0; n], vec![0.0; n]];
        Self {
            acc: z(),
            k: z(),
            stage: z(),
        }
    }

    fn step<F>(&mut self, y0: &mut [f64], y1: &mut [f64], dt: f64, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], &[f64], &mut [f64], &mut [f64]) -> Result<()>,
    {
        let Self { acc, k, stage } = self;
        let [k0, k1] = k;
        let [a0, a1] = acc;
        let [s0, s1] = stage;

        f(y0, y1, k0, k1)?;
        a0.copy_from_slice(k0);
        a1.copy_from_slice(k1);
        for (c, w) in [(0.5, 2.0), (0.5, 2.0), (1.0, 1.0)] {
            for j in 0..y0.len() {
                s0[j] = y0[j] + c * dt * k0[j];
                s1[j] = y1[j] + c * dt * k1[j];
            }
            f(s0, s1, k0, k1)?;
            for j in 0..y0.len() {
                a0[j] += w * k0[j];
                a1[j] += w * k1[j];
            }
        }
        let h = dt / 6.0;
        for j in 0..y0.len() {
            y0[j] += h * a0[j];
            y1[j] += h * a1[j];
        }
        if let Some(index) = y0.iter().chain(y1.iter()).position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteField {
                field: if index < y0.len() { "v" } else { "omega" },
                index: index % y0.len(),
            });
        }
        Ok(())
    }
}

/// Time stepper owning its derivative provider and scratch space.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    control: StepControl,
    calc: Spectral,
    ws: RhsWorkspace,
    rk: Rk4,
}

impl Integrator {
    pub fn new(params: ModelParams, control: StepControl, grid: PeriodicGrid, dealias: bool) -> Result<Self> {
        control.validate()?;
        Ok(Self {
            params,
            control,
            calc: Spectral::new(grid).with_dealias(dealias),
            ws: RhsWorkspace::new(grid.n()),
            rk: Rk4::new(grid.n()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.calc
    }

    pub fn stable_dt(&self, state: &State) -> f64 {
        stable_dt(&self.params, self.calc.grid(), state, &self.control)
    }

    /// One RK4 step of size `dt` in place. On error the state is left unchanged.
    pub fn step_by(&mut self, state: &mut State, dt: f64) -> Result<()> {
        let Self {
            params,
            control,
            calc,
            ws,
            rk,
        } = self;
        let frozen = control.frozen_omega;
        let mut v = state.v.clone();
        let mut w = state.omega.clone();
        rk.step(&mut v, &mut w, dt, |v, w, dv, dw| {
            ws.original(params, v, w, calc, frozen, dv, dw)
        })?;
        state.v = v;
        state.omega = w;
        state.time += dt;
        Ok(())
    }

    fn sample(&mut self, state: &State, out: &mut RunOutcome, observers: &mut [&mut dyn Observer]) {
        let report = energy_report(&self.params, state, &mut self.calc);
        let point = record_trace(state, &mut self.calc);
        out.trace.push(TraceRow::new(&report, &point));
        for o in observers.iter_mut() {
            o.observe(state, &report);
        }
        out.diagnostics.push(report);
    }

    /// Advances to `t_end`, sampling every `sample_interval` (steps are clipped to
    /// land on sample times exactly).
    pub fn run(&mut self, initial: State, observers: &mut [&mut dyn Observer]) -> RunOutcome {
        let t0 = initial.time;
        let t_end = self.control.t_end.max(t0);
        let si = self.control.sample_interval;
        let mut out = RunOutcome {
            final_state: initial.clone(),
            halt_reason: HaltReason::ReachedTEnd,
            trace: PointTrace::default(),
            diagnostics: Vec::new(),
            steps: 0,
        };
        let mut state = initial;
        self.sample(&state, &mut out, observers);
        if !state.is_finite() {
            out.halt_reason = HaltReason::NonFinite;
            out.final_state = state;
            return out;
        }

        let mut k = 1u64;
        let next_sample = |k: u64| {
            let s = t0 + k as f64 * si;
            if t_end - s < 1e-9 * si {
                t_end
            } else {
                s
            }
        };
        let mut target = next_sample(k);

        while state.time < t_end {
            let dt_stab = self.stable_dt(&state);
            if dt_stab < self.control.dt_min {
                out.halt_reason = HaltReason::StepUnderflow;
                break;
            }
            let remaining = target - state.time;
            let (dt, lands) = if dt_stab >= remaining {
                (remaining, true)
            } else {
                (dt_stab, false)
            };
            if self.step_by(&mut state, dt).is_err() {
                out.halt_reason = HaltReason::NonFinite;
                break;
            }
            out.steps += 1;
            if lands {
                state.time = target;
            }

            let omega2 = self.calc.trace_at_zero(&state.omega, 2);
            if !omega2.is_finite() {
                out.halt_reason = HaltReason::NonFinite;
                break;
            }
            if omega2.abs() > self.control.stop_threshold {
                self.sample(&state, &mut out, observers);
                out.halt_reason = HaltReason::BlowupThreshold;
                break;
            }
            if lands {
                self.sample(&state, &mut out, observers);
                if target >= t_end {
                    break;
                }
                k += 1;
                target = next_sample(k);
            }
        }
        out.final_state = state;
        out
    }
}

/// One RK4 step with the stability-limited step size.
pub fn step(params: &ModelParams, state: &State, control: &StepControl, calc: &mut Spectral) -> Result<State> {
    let grid = *calc.grid();
    grid.check_len("v", &state.v)?;
    grid.check_len("omega", &state.omega)?;
    let dt = stable_dt(params, &grid, state, control);
    let mut ws = RhsWorkspace::new(grid.n());
    let mut rk = Rk4::new(grid.n());
    let mut v = state.v.clone();
    let mut w = state.omega.clone();
    let frozen = control.frozen_omega;
    rk.step(&mut v, &mut w, dt, |v, w, dv, dw| {
        ws.original(params, v, w, calc, frozen, dv, dw)
    })?;
    Ok(State {
        time: state.time + dt,
        v,
        omega: w,
    })
}

/// Runs with dealiasing on, on the grid implied by the state's length.
pub fn run(
    params: &ModelParams,
    initial: State,
    control: &StepControl,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome> {
    let grid = PeriodicGrid::new(initial.len())?;
    grid.check_len("omega", &initial.omega)?;
    let mut integ = Integrator::new(*params, *control, grid, true)?;
    Ok(integ.run(initial, observers))
}

/// Evolves `(v, eta)` with the good-unknown right-hand side to `control.t_end`.
/// The step size follows the same rule as the original system with `omega = eta^2`.
pub fn run_good(
    params: &ModelParams,
    v: &[f64],
    eta: &[f64],
    t0: f64,
    control: &StepControl,
    calc: &mut Spectral,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    control.validate()?;
    let grid = *calc.grid();
    grid.check_len("v", v)?;
    grid.check_len("eta", eta)?;
    let mut ws = RhsWorkspace::new(grid.n());
    let mut rk = Rk4::new(grid.n());
    let mut v = v.to_vec();
    let mut e = eta.to_vec();
    let mut t = t0;
    let mut steps = 0;
    while t < control.t_end {
        let (diff, vmax) = coefficient_bounds(params, &v, e.iter().map(|x| x * x));
        let dt_stab = limit_dt(params, &grid, control, diff, vmax);
        if dt_stab < control.dt_min {
            return Err(Error::InvalidParameter {
                name: "dt_min",
                reason: format!("stability step {dt_stab:e} fell below dt_min at t = {t}"),
            });
        }
        let dt = dt_stab.min(control.t_end - t);
        rk.step(&mut v, &mut e, dt, |v, e, dv, de| ws.good(params, v, e, calc, dv, de))?;
        t = if dt_stab >= control.t_end - t { control.t_end } else { t + dt };
        steps += 1;
    }
    Ok((v, e, steps))
}
