//! Exact ODEs satisfied by `V^(1)(t) = v_x(t, 0)` and `Omega^(2)(t) = omega_xx(t, 0)`
//! for symmetric data with `omega(t, 0) = 0`, their closed forms and
//! envelopes, and an embedded Runge-Kutta integrator for the rest.
//!
//! ```text
//! dV/dt = [alpha = 1] Omega V            - [c] V^2
//! dO/dt = [beta = 1] 3 kappa0 O^2 + [alpha = 1] O V^2 - [c] 2 V O
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_point, ModelParams, RegimeLabel, SymmetryPointData};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub t: f64,
    pub v1: f64,
    pub omega2: f64,
    pub omega0: f64,
}

impl ReducedState {
    pub fn new(t: f64, v1: f64, omega2: f64) -> Self {
        Self {
            t,
            v1,
            omega2,
            omega0: 0.0,
        }
    }
}

/// Which terms of the reduction survive at `Omega^(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    alpha_one: bool,
    beta_one: bool,
    kappa0: f64,
    convective: bool,
}

impl Reduction {
    pub fn new(params: &ModelParams) -> Result<Self> {
        for (name, value) in [("alpha", params.alpha()), ("beta", params.beta())] {
            if value > 1.0 && value < 2.0 {
                return Err(Error::UnsupportedExponent { name, value });
            }
        }
        Ok(Self {
            alpha_one: params.alpha() == 1.0,
            beta_one: params.beta() == 1.0,
            kappa0: params.kappa0(),
            convective: params.convective(),
        })
    }

    #[inline]
    pub fn rhs(&self, v1: f64, omega2: f64) -> (f64, f64) {
        let mut dv = 0.0;
        let mut dw = 0.0;
        if self.alpha_one {
            dv += omega2 * v1;
            dw += omega2 * v1 * v1;
        }
        if self.beta_one {
            dw += 3.0 * self.kappa0 * omega2 * omega2;
        }
        if self.convective {
            dv -= v1 * v1;
            dw -= 2.0 * v1 * omega2;
        }
        (dv, dw)
    }
}

fn check_point(rs: &ReducedState) -> Result<()> {
    if rs.omega0 != 0.0 {
        return Err(Error::InvalidParameter {
            name: "omega0",
            reason: format!("the reduction needs omega(t, 0) = 0, got {}", rs.omega0),
        });
    }
    if !(rs.v1.is_finite() && rs.omega2.is_finite() && rs.t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "reduced state",
            reason: "values must be finite".into(),
        });
    }
    Ok(())
}

/// `(dV^(1)/dt, dOmega^(2)/dt)`.
pub fn reduced_rhs(params: &ModelParams, rs: &ReducedState) -> Result<(f64, f64)> {
    check_point(rs)?;
    Ok(Reduction::new(params)?.rhs(rs.v1, rs.omega2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t0")]
pub enum SingularTime {
    Exact(f64),
    /// The singularity occurs no later than this.
    AtMost(f64),
    None,
}

impl SingularTime {
    pub fn time(&self) -> Option<f64> {
        match *self {
            SingularTime::Exact(t) | SingularTime::AtMost(t) => Some(t),
            SingularTime::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    /// The evaluator is the solution.
    Exact,
    /// The evaluator is a lower envelope for `Omega^(2)` (and for `|V^(1)|`).
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Variant {
    Case3,
    Case1,
    Case2,
    Frozen,
    BurgersBetaOne,
    BurgersBetaHigh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub case_label: Option<RegimeLabel>,
    pub kind: FormKind,
    pub singular_time: SingularTime,
    /// `Omega^(2) - (V^(1))^2 / 2`, conserved for `alpha = 1`, `beta >= 2`.
    pub first_integral: Option<f64>,
    initial: ReducedState,
    kappa0: f64,
    variant: Variant,
}

fn first_positive_root(rates: &[f64]) -> Option<f64> {
    // smallest t > 0 with 1 - r t = 0
    rates
        .iter()
        .filter(|r| **r > 0.0)
        .map(|r| 1.0 / r)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))))
}

/// Closed form or envelope for the reduced system started from `initial`.
pub fn closed_form(params: &ModelParams, initial: &ReducedState) -> Result<ClosedForm> {
    check_point(initial)?;
    let red = Reduction::new(params)?;
    let (v0, w0, k) = (initial.v1, initial.omega2, params.kappa0());
    let label = classify_point(params, &SymmetryPointData::symmetric(v0, w0)).label;
    let alpha_high = params.alpha() >= 2.0;

    let (variant, kind, singular_time, first_integral) = if !params.convective() {
        match (red.alpha_one, red.beta_one) {
            (false, true) => {
                let st = first_positive_root(&[3.0 * k * w0]).map_or(SingularTime::None, SingularTime::Exact);
                (Variant::Case3, FormKind::Exact, st, None)
            }
            (true, false) => {
                let inv = w0 - 0.5 * v0 * v0;
                if !(inv <= 0.0 && w0 > 0.0) {
                    return Err(Error::NoClosedForm(format!(
                        "alpha = 1, beta = {}: hypotheses unmet (need d1x v0(0) >= sqrt(2 d2x omega0(0)))",
                        params.beta()
                    )));
                }
                (
                    Variant::Case1,
                    FormKind::Envelope,
                    SingularTime::AtMost(1.0 / (2.0 * w0)),
                    Some(inv),
                )
            }
            (true, true) => {
                let st = first_positive_root(&[3.0 * k * w0]).map_or(SingularTime::None, SingularTime::AtMost);
                (Variant::Case2, FormKind::Envelope, st, None)
            }
            (false, false) => (Variant::Frozen, FormKind::Exact, SingularTime::None, None),
        }
    } else if alpha_high {
        if red.beta_one {
            let st = first_positive_root(&[-v0, 3.0 * k * w0 - v0]).map_or(SingularTime::None, SingularTime::Exact);
            (Variant::BurgersBetaOne, FormKind::Exact, st, None)
        } else {
            let st = first_positive_root(&[-v0]).map_or(SingularTime::None, SingularTime::Exact);
            (Variant::BurgersBetaHigh, FormKind::Exact, st, None)
        }
    } else {
        return Err(Error::NoClosedForm(format!(
            "convective alpha = 1, beta = {}",
            params.beta()
        )));
    };

    Ok(ClosedForm {
        case_label: label,
        kind,
        singular_time,
        first_integral,
        initial: *initial,
        kappa0: k,
        variant,
    })
}

impl ClosedForm {
    pub fn is_exact(&self) -> bool {
        self.kind == FormKind::Exact
    }

    pub fn initial(&self) -> &ReducedState {
        &self.initial
    }

    /// `(V^(1)(t), Omega^(2)(t))`, or their lower envelopes. Infinite at and past
    /// the singular time.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        let s = t - self.initial.t;
        let (v0, w0, k) = (self.initial.v1, self.initial.omega2, self.kappa0);
        if let Some(t0) = self.singular_time.time() {
            if s >= t0 {
                return (f64::INFINITY.copysign(v0), f64::INFINITY);
            }
        }
        match self.variant {
            Variant::Case3 => (v0, w0 / (1.0 - 3.0 * k * w0 * s)),
            Variant::Frozen => (v0, w0),
            Variant::Case1 => {
                let w = w0 / (1.0 - 2.0 * w0 * s);
                let inv = self.first_integral.unwrap_or(0.0);
                ((2.0 * (w - inv)).sqrt().copysign(v0), w)
            }
            Variant::Case2 => {
                let d = 1.0 - 3.0 * k * w0 * s;
                (v0 * d.powf(-1.0 / (3.0 * k)), w0 / d)
            }
            Variant::BurgersBetaOne => {
                let a = 1.0 + v0 * s;
                (v0 / a, w0 / (a * (a - 3.0 * k * w0 * s)))
            }
            Variant::BurgersBetaHigh => {
                let a = 1.0 + v0 * s;
                (v0 / a, w0 / (a * a))
            }
        }
    }
}

/// Output of the embedded integrator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedSeries {
    pub points: Vec<ReducedState>,
    /// True if `|V|` or `|Omega|` crossed the threshold before the end.
    pub halted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub threshold: f64,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            threshold: 1e6,
            h_max: f64::INFINITY,
        }
    }
}

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type Y = [f64; 2];

fn axpy(y: Y, terms: &[(f64, Y)], h: f64) -> Y {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand-Prince step: `(y_new, k7, error estimate)`.
fn dopri_step(f: &impl Fn(Y) -> Y, y: Y, k1: Y, h: f64) -> (Y, Y, Y) {
    let k2 = f(axpy(y, &[(A21, k1)], h));
    let k3 = f(axpy(y, &[(A31, k1), (A32, k2)], h));
    let k4 = f(axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
    let k5 = f(axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
    let k6 = f(axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
    let yn = axpy(y, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
    let k7 = f(yn);
    let err = axpy(
        [0.0, 0.0],
        &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
        h,
    );
    (yn, k7, err)
}

fn dopri(
    red: &Reduction,
    initial: &ReducedState,
    t_end: f64,
    outputs: Option<&[f64]>,
    opts: &OdeOptions,
) -> ReducedSeries {
    let f = |y: Y| {
        let (a, b) = red.rhs(y[0], y[1]);
        [a, b]
    };
    let mut series = ReducedSeries::default();
    let mut t = initial.t;
    let mut y = [initial.v1, initial.omega2];
    let mut out_idx = 0;
    let outs = outputs.unwrap_or(&[]);
    while out_idx < outs.len() && outs[out_idx] <= t {
        if outs[out_idx] == t {
            series.points.push(ReducedState::new(t, y[0], y[1]));
        }
        out_idx += 1;
    }
    if outputs.is_none() {
        series.points.push(ReducedState::new(t, y[0], y[1]));
    }
    let mut k1 = f(y);
    let scale = |y: Y| y[0].abs().max(y[1].abs()).max(1.0);
    let mut h = (0.01 / scale(k1).max(1.0)).min(opts.h_max).min((t_end - t).max(0.0));
    let tol = opts.rel_tol;

    while t < t_end {
        let next_out = outs.get(out_idx).copied().unwrap_or(f64::INFINITY);
        let stop = next_out.min(t_end);
        let mut hh = h.min(opts.h_max);
        let clipped = t + hh >= stop;
        if clipped {
            hh = stop - t;
        }
        if hh <= 1e-15 * t.abs().max(1.0) && !clipped {
            series.halted = true;
            break;
        }
        let (yn, k7, e) = dopri_step(&f, y, k1, hh);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let sc = tol * (y[i].abs().max(yn[i].abs()) + 1e-6);
            err = err.max((e[i] / sc).abs());
        }
        if !(yn[0].is_finite() && yn[1].is_finite()) {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            t = if clipped { stop } else { t + hh };
            y = yn;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !clipped || hh >= h {
                h = hh * fac;
            }
            if outputs.is_none() {
                series.points.push(ReducedState::new(t, y[0], y[1]));
            } else if clipped && t == next_out {
                series.points.push(ReducedState::new(t, y[0], y[1]));
                out_idx += 1;
            }
            if y[0].abs() > opts.threshold || y[1].abs() > opts.threshold {
                series.halted = true;
                break;
            }
        } else {
            h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-15 * t.abs().max(1.0) {
                series.halted = true;
                break;
            }
        }
    }
    series
}

/// Adaptive integration recording every accepted step; stops at `t_end` or when
/// `|V|` or `|Omega|` exceeds `1e6`.
pub fn integrate_reduced(params: &ModelParams, initial: &ReducedState, t_end: f64, tol: f64) -> Result<ReducedSeries> {
    integrate_reduced_with(
        params,
        initial,
        t_end,
        &OdeOptions {
            rel_tol: tol,
            ..OdeOptions::default()
        },
    )
}

pub fn integrate_reduced_with(
    params: &ModelParams,
    initial: &ReducedState,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<ReducedSeries> {
    check_point(initial)?;
    let red = Reduction::new(params)?;
    Ok(dopri(&red, initial, t_end, None, opts))
}

/// Values at the given ascending times. Times past a threshold halt are absent
/// from the output.
pub fn integrate_reduced_at(
    params: &ModelParams,
    initial: &ReducedState,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<ReducedSeries> {
    check_point(initial)?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "must be strictly increasing".into(),
        });
    }
    let red = Reduction::new(params)?;
    let t_end = times.last().copied().unwrap_or(initial.t);
    Ok(dopri(&red, initial, t_end, Some(times), opts))
}
