//! The 1-D degenerate parabolic system, with and without convection:
//!
//! ```text
//! v_t     + [c] v v_x = (omega^alpha v_x)_x
//! omega_t + [c] v omega_x = kappa0 (omega^beta omega_x)_x + omega^alpha |v_x|^2
//! ```
//!
//! and its form in the unknowns `(v, eta = sqrt(omega))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, Spectral};

/// Exponents, diffusion constant and convection switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    kappa0: f64,
    convective: bool,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
    kappa0: f64,
    #[serde(default)]
    convective: bool,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.alpha, r.beta, r.kappa0, r.convective)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
            kappa0: p.kappa0,
            convective: p.convective,
        }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, kappa0: f64, convective: bool) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{alpha} must be a finite value >= 1"),
            });
        }
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("{beta} must be a finite value >= 1"),
            });
        }
        if !(kappa0.is_finite() && kappa0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa0",
                reason: format!("{kappa0} must be finite and positive"),
            });
        }
        Ok(Self {
            alpha,
            beta,
            kappa0,
            convective,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }
    pub fn convective(&self) -> bool {
        self.convective
    }
}

/// Fields `v` and `omega` on the grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
}

impl State {
    pub fn new(grid: &PeriodicGrid, time: f64, v: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        grid.check_len("v", &v)?;
        grid.check_len("omega", &omega)?;
        check_finite("v", &v)?;
        check_finite("omega", &omega)?;
        Ok(Self { time, v, omega })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `eta = sqrt(max(omega, 0))`.
    pub fn eta(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.max(0.0).sqrt()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.omega).all(|x| x.is_finite())
    }
}

/// Admissible undershoot of `omega` below zero: `1e-8 * max(1, |omega0|_inf)`.
pub fn negativity_tolerance(omega0: &[f64]) -> f64 {
    let peak = omega0.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    1e-8 * peak.max(1.0)
}

pub(crate) fn check_finite(field: &'static str, f: &[f64]) -> Result<()> {
    match f.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteField { field, index }),
        None => Ok(()),
    }
}

#[inline]
pub(crate) fn pow_clamped(x: f64, p: f64) -> f64 {
    let x = x.max(0.0);
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == 0.0 {
        1.0
    } else if p.fract() == 0.0 && p.abs() <= 16.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// Scratch buffers for right-hand-side evaluations.
#[derive(Debug, Clone)]
pub struct RhsWorkspace {
    dx_a: Vec<f64>,
    dx_b: Vec<f64>,
    flux: Vec<f64>,
    extra: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            dx_a: vec![0.0; n],
            dx_b: vec![0.0; n],
            flux: vec![0.0; n],
            extra: vec![0.0; n],
        }
    }

    /// Right-hand side in `(v, omega)`. With `frozen_omega` the omega equation is
    /// switched off and `omega` acts as a fixed coefficient.
    #[allow(clippy::too_many_arguments)]
    pub fn original(
        &mut self,
        params: &ModelParams,
        v: &[f64],
        omega: &[f64],
        calc: &mut Spectral,
        frozen_omega: bool,
        dv: &mut [f64],
        domega: &mut [f64],
    ) -> Result<()> {
        let (alpha, beta, kappa0) = (params.alpha, params.beta, params.kappa0);
        let Self {
            dx_a: vx,
            dx_b: wx,
            flux,
            extra,
        } = self;

        calc.differentiate_into(v, 1, vx);
        for j in 0..v.len() {
            flux[j] = pow_clamped(omega[j], alpha) * vx[j];
            extra[j] = flux[j] * vx[j];
        }
        calc.flux_divergence_into(flux, dv);

        if frozen_omega {
            domega.iter_mut().for_each(|x| *x = 0.0);
        } else {
            calc.differentiate_into(omega, 1, wx);
            for j in 0..v.len() {
                flux[j] = kappa0 * pow_clamped(omega[j], beta) * wx[j];
            }
            calc.flux_divergence_into(flux, domega);
            calc.filter_in_place(extra);
            for (d, s) in domega.iter_mut().zip(extra.iter()) {
                *d += s;
            }
        }

        if params.convective {
            for j in 0..v.len() {
                extra[j] = v[j] * vx[j];
            }
            calc.filter_in_place(extra);
            for (d, c) in dv.iter_mut().zip(extra.iter()) {
                *d -= c;
            }
            if !frozen_omega {
                for j in 0..v.len() {
                    extra[j] = v[j] * wx[j];
                }
                calc.filter_in_place(extra);
                for (d, c) in domega.iter_mut().zip(extra.iter()) {
                    *d -= c;
                }
            }
        }

        check_finite("dv_dt", dv)?;
        check_finite("domega_dt", domega)
    }

    /// Right-hand side in the good unknowns `(v, eta)`.
    pub fn good(
        &mut self,
        params: &ModelParams,
        v: &[f64],
        eta: &[f64],
        calc: &mut Spectral,
        dv: &mut [f64],
        deta: &mut [f64],
    ) -> Result<()> {
        let (alpha, beta, kappa0) = (params.alpha, params.beta, params.kappa0);
        if 2.0 * alpha - 1.0 < 0.0 || 2.0 * beta - 1.0 < 0.0 {
            return Err(Error::NegativePower(format!(
                "eta^(2 alpha - 1) or eta^(2 beta - 1) with alpha = {alpha}, beta = {beta}"
            )));
        }
        let Self {
            dx_a: vx,
            dx_b: ex,
            flux,
            extra,
        } = self;

        calc.differentiate_into(v, 1, vx);
        calc.differentiate_into(eta, 1, ex);
        for j in 0..v.len() {
            flux[j] = pow_clamped(eta[j], 2.0 * alpha) * vx[j];
        }
        calc.flux_divergence_into(flux, dv);

        for j in 0..v.len() {
            flux[j] = kappa0 * pow_clamped(eta[j], 2.0 * beta) * ex[j];
            extra[j] = 0.5 * pow_clamped(eta[j], 2.0 * alpha - 1.0) * vx[j] * vx[j]
                + kappa0 * pow_clamped(eta[j], 2.0 * beta - 1.0) * ex[j] * ex[j];
        }
        calc.flux_divergence_into(flux, deta);
        calc.filter_in_place(extra);
        for (d, s) in deta.iter_mut().zip(extra.iter()) {
            *d += s;
        }

        if params.convective {
            for j in 0..v.len() {
                extra[j] = v[j] * vx[j];
            }
            calc.filter_in_place(extra);
            for (d, c) in dv.iter_mut().zip(extra.iter()) {
                *d -= c;
            }
            for j in 0..v.len() {
                extra[j] = v[j] * ex[j];
            }
            calc.filter_in_place(extra);
            for (d, c) in deta.iter_mut().zip(extra.iter()) {
                *d -= c;
            }
        }

        check_finite("dv_dt", dv)?;
        check_finite("deta_dt", deta)
    }
}

/// `(dv/dt, domega/dt)` for the full system.
pub fn rhs_original(
    params: &ModelParams,
    state: &State,
    calc: &mut Spectral,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = calc.grid().n();
    calc.grid().check_len("v", &state.v)?;
    calc.grid().check_len("omega", &state.omega)?;
    let mut dv = vec![0.0; n];
    let mut dw = vec![0.0; n];
    RhsWorkspace::new(n).original(params, &state.v, &state.omega, calc, false, &mut dv, &mut dw)?;
    Ok((dv, dw))
}

/// `(dv/dt, deta/dt)` for the system written in `(v, eta)`.
pub fn rhs_good(
    params: &ModelParams,
    v: &[f64],
    eta: &[f64],
    calc: &mut Spectral,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = calc.grid().n();
    calc.grid().check_len("v", v)?;
    calc.grid().check_len("eta", eta)?;
    let mut dv = vec![0.0; n];
    let mut de = vec![0.0; n];
    RhsWorkspace::new(n).good(params, v, eta, calc, &mut dv, &mut de)?;
    Ok((dv, de))
}

/// The six blow-up theorem cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    /// alpha = 1, beta in {2} or [3, inf), v0'(0) >= sqrt(2 omega0''(0))
    #[serde(rename = "NC-Case1")]
    NcCase1,
    /// alpha = beta = 1
    #[serde(rename = "NC-Case2")]
    NcCase2,
    /// alpha >= 2, beta = 1
    #[serde(rename = "NC-Case3")]
    NcCase3,
    /// convective, v0'(0) < 0
    #[serde(rename = "C-ThmA")]
    CThmA,
    /// convective, beta = 1, alpha >= 2, v0'(0) >= 0
    #[serde(rename = "C-ThmB-a")]
    CThmBa,
    /// convective, beta = 1, alpha = 1, v0'(0) >= 0
    #[serde(rename = "C-ThmB-b")]
    CThmBb,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 6] = [
        RegimeLabel::NcCase1,
        RegimeLabel::NcCase2,
        RegimeLabel::NcCase3,
        RegimeLabel::CThmA,
        RegimeLabel::CThmBa,
        RegimeLabel::CThmBb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::NcCase1 => "NC-Case1",
            RegimeLabel::NcCase2 => "NC-Case2",
            RegimeLabel::NcCase3 => "NC-Case3",
            RegimeLabel::CThmA => "C-ThmA",
            RegimeLabel::CThmBa => "C-ThmB-a",
            RegimeLabel::CThmBb => "C-ThmB-b",
        }
    }

    pub fn is_convective(&self) -> bool {
        matches!(
            self,
            RegimeLabel::CThmA | RegimeLabel::CThmBa | RegimeLabel::CThmBb
        )
    }

    /// Representative `(alpha, beta)` for the case.
    pub fn default_exponents(&self) -> (f64, f64) {
        match self {
            RegimeLabel::NcCase1 => (1.0, 2.0),
            RegimeLabel::NcCase2 | RegimeLabel::CThmBb => (1.0, 1.0),
            RegimeLabel::NcCase3 | RegimeLabel::CThmA | RegimeLabel::CThmBa => (2.0, 1.0),
        }
    }

    /// Checks that the exponents and the convection flag belong to this case's
    /// hypothesis set (data conditions are not checked here).
    pub fn validate_params(&self, p: &ModelParams) -> Result<()> {
        let (a, b) = (p.alpha, p.beta);
        let ok = match self {
            RegimeLabel::NcCase1 => !p.convective && is_one(a) && beta_case1(b),
            RegimeLabel::NcCase2 => !p.convective && is_one(a) && is_one(b),
            RegimeLabel::NcCase3 => !p.convective && a >= 2.0 && is_one(b),
            RegimeLabel::CThmA => p.convective && alpha_admissible(a) && beta_admissible(b),
            RegimeLabel::CThmBa => p.convective && a >= 2.0 && is_one(b),
            RegimeLabel::CThmBb => p.convective && is_one(a) && is_one(b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "case",
                reason: format!(
                    "alpha = {a}, beta = {b}, convective = {} do not fit {}",
                    p.convective,
                    self.as_str()
                ),
            })
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RegimeLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter {
                name: "case",
                reason: format!("unknown case `{s}`"),
            })
    }
}

fn is_one(x: f64) -> bool {
    x == 1.0
}

fn alpha_admissible(a: f64) -> bool {
    a == 1.0 || a >= 2.0
}

fn beta_admissible(b: f64) -> bool {
    b == 1.0 || b == 2.0 || b >= 3.0
}

fn beta_case1(b: f64) -> bool {
    b == 2.0 || b >= 3.0
}

/// One checked hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub condition: String,
    pub satisfied: bool,
}

/// Which theorem case applies, with every condition that was checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCase {
    pub label: Option<RegimeLabel>,
    pub hypothesis_report: Vec<Hypothesis>,
}

impl RegimeCase {
    pub fn label_str(&self) -> &'static str {
        self.label.map_or("none", |l| l.as_str())
    }
}

/// Data at the symmetry point used by the classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryPointData {
    pub v1: f64,
    pub omega0: f64,
    pub omega2: f64,
    pub odd_error: f64,
    pub even_error: f64,
}

impl SymmetryPointData {
    pub fn measure(state: &State, calc: &mut Spectral) -> Self {
        let (odd_error, even_error) = calc.grid().symmetry_errors(&state.v, &state.omega);
        Self {
            v1: calc.trace_at_zero(&state.v, 1),
            omega0: state.omega[calc.grid().zero_index()],
            omega2: calc.trace_at_zero(&state.omega, 2),
            odd_error,
            even_error,
        }
    }

    /// Exactly symmetric data with `omega(0) = 0`, as produced by the initial-data builder.
    pub fn symmetric(v1: f64, omega2: f64) -> Self {
        Self {
            v1,
            omega0: 0.0,
            omega2,
            odd_error: 0.0,
            even_error: 0.0,
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Determines which blow-up theorem's hypotheses hold for the initial data.
pub fn classify_regime(params: &ModelParams, initial: &State, calc: &mut Spectral) -> RegimeCase {
    let data = SymmetryPointData::measure(initial, calc);
    classify_point(params, &data)
}

pub fn classify_point(params: &ModelParams, d: &SymmetryPointData) -> RegimeCase {
    let (a, b, k) = (params.alpha, params.beta, params.kappa0);
    let mut report = Vec::new();
    let mut check = |condition: String, satisfied: bool| {
        report.push(Hypothesis {
            condition,
            satisfied,
        });
        satisfied
    };

    let odd = check("v0 odd about 0".into(), d.odd_error <= SYMMETRY_TOL);
    let even = check("omega0 even about 0".into(), d.even_error <= SYMMETRY_TOL);
    let zero = check("omega0(0) = 0".into(), d.omega0.abs() <= SYMMETRY_TOL);
    let curv = check("d2x omega0(0) > 0".into(), d.omega2 > 0.0);
    let common = odd && even && zero && curv;

    let label = if !params.convective {
        check("non-convective system".into(), true);
        let a_one = check(format!("alpha = 1 (alpha = {a})"), is_one(a));
        let a_two = check(format!("alpha >= 2 (alpha = {a})"), a >= 2.0);
        let b_one = check(format!("beta = 1 (beta = {b})"), is_one(b));
        let b_case1 = check(format!("beta in {{2}} u [3, inf) (beta = {b})"), beta_case1(b));
        let slope = check(
            format!(
                "d1x v0(0) >= sqrt(2 d2x omega0(0)) ({} >= {})",
                d.v1,
                (2.0 * d.omega2.max(0.0)).sqrt()
            ),
            d.omega2 >= 0.0 && d.v1 >= (2.0 * d.omega2).sqrt(),
        );
        if !common {
            None
        } else if b_one && a_one {
            Some(RegimeLabel::NcCase2)
        } else if b_one && a_two {
            Some(RegimeLabel::NcCase3)
        } else if b_case1 && a_one && slope {
            Some(RegimeLabel::NcCase1)
        } else {
            None
        }
    } else {
        check("convective system".into(), true);
        let a_adm = check(format!("alpha in {{1}} u [2, inf) (alpha = {a})"), alpha_admissible(a));
        let b_adm = check(format!("beta in {{1, 2}} u [3, inf) (beta = {b})"), beta_admissible(b));
        let neg = check(format!("d1x v0(0) < 0 ({})", d.v1), d.v1 < 0.0);
        let b_one = check(format!("beta = 1 (beta = {b})"), is_one(b));
        let a_one = is_one(a);
        let a_two = a >= 2.0;
        let cond_a = check(
            format!("3 kappa0 d2x omega0(0) - 2 d1x v0(0) > 0 ({})", 3.0 * k * d.omega2 - 2.0 * d.v1),
            3.0 * k * d.omega2 - 2.0 * d.v1 > 0.0,
        );
        let cond_b = check(
            format!("3 kappa0 d2x omega0(0) > 1 ({})", 3.0 * k * d.omega2),
            3.0 * k * d.omega2 > 1.0,
        );
        if !common {
            None
        } else if neg && a_adm && b_adm {
            Some(RegimeLabel::CThmA)
        } else if !neg && b_one && a_two && cond_a {
            Some(RegimeLabel::CThmBa)
        } else if !neg && b_one && a_one && cond_b {
            Some(RegimeLabel::CThmBb)
        } else {
            None
        }
    };

    RegimeCase {
        label,
        hypothesis_report: report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::InitPreset;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn grid(n: usize) -> (PeriodicGrid, Spectral) {
        let g = PeriodicGrid::new(n).unwrap();
        (g, Spectral::new(g))
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(ModelParams::new(0.5, 1.0, 1.0, false).is_err());
        assert!(ModelParams::new(1.0, 0.99, 1.0, false).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, false).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN, false).is_err());
        assert!(ModelParams::new(1.5, 1.0, 1.0, false).is_ok());
    }

    #[test]
    fn zero_omega_gives_zero_rhs() {
        let (g, mut s) = grid(32);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let st = State::new(&g, 0.0, g.sample(|x| (2.0 * x).sin() + x.cos()), vec![0.0; 32]).unwrap();
        let (dv, dw) = rhs_original(&p, &st, &mut s).unwrap();
        assert!(dv.iter().chain(&dw).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn hand_evaluated_rhs_at_quarter_period_and_origin() {
        // n = 64 puts x = pi/2 on node 48
        let (g, mut s) = grid(64);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let st = State::new(&g, 0.0, g.sample(f64::sin), g.sample(|x| 1.0 - x.cos())).unwrap();
        let (dv, dw) = rhs_original(&p, &st, &mut s).unwrap();
        let j = 48;
        assert_abs_diff_eq!(g.node(j), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(dv[j], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dw[j], 1.0, epsilon = 1e-12);
        let z = g.zero_index();
        assert_abs_diff_eq!(dv[z], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dw[z], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rhs_matches_closed_form_everywhere() {
        // oracle from hand differentiation:
        // dv = w' v' + w v'' = sin x cos x - (1 - cos x) sin x
        // dw = w'^2 + w w'' + w v'^2 = sin^2 + (1 - cos) cos + (1 - cos) cos^2
        let (g, mut s) = grid(64);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let st = State::new(&g, 0.0, g.sample(f64::sin), g.sample(|x| 1.0 - x.cos())).unwrap();
        let (dv, dw) = rhs_original(&p, &st, &mut s).unwrap();
        for (j, x) in g.nodes().into_iter().enumerate() {
            let (sn, cs) = x.sin_cos();
            assert_abs_diff_eq!(dv[j], sn * cs - (1.0 - cs) * sn, epsilon = 1e-12);
            assert_abs_diff_eq!(
                dw[j],
                sn * sn + (1.0 - cs) * cs + (1.0 - cs) * cs * cs,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn good_form_examples() {
        let (g, mut s) = grid(64);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let (dv, de) = rhs_good(&p, &g.sample(f64::sin), &vec![0.0; 64], &mut s).unwrap();
        assert!(dv.iter().chain(&de).all(|x| x.abs() < 1e-14));
        let (dv, de) = rhs_good(&p, &g.sample(f64::sin), &vec![1.0; 64], &mut s).unwrap();
        for (j, x) in g.nodes().into_iter().enumerate() {
            assert_abs_diff_eq!(dv[j], -x.sin(), epsilon = 1e-12);
            assert_abs_diff_eq!(de[j], 0.5 * x.cos().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_omega_reduces_to_heat_equation() {
        let (g, mut s) = grid(64);
        for alpha in [1.0, 2.0, 2.5] {
            let p = ModelParams::new(alpha, 1.0, 1.0, false).unwrap();
            let v = g.sample(|x| x.sin() + 0.3 * (4.0 * x).cos());
            let c: f64 = 1.7;
            let st = State::new(&g, 0.0, v.clone(), vec![c; 64]).unwrap();
            let (dv, _) = rhs_original(&p, &st, &mut s).unwrap();
            let vxx = s.differentiate(&v, 2);
            for j in 0..64 {
                assert_abs_diff_eq!(dv[j], c.powf(alpha) * vxx[j], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn classify_examples() {
        let (g, mut s) = grid(64);
        let st = InitPreset::sine_versine(1.0, 1.0).build(&g).unwrap();
        let p = ModelParams::new(2.0, 1.0, 1.0, false).unwrap();
        assert_eq!(classify_regime(&p, &st, &mut s).label, Some(RegimeLabel::NcCase3));

        let st2 = InitPreset::sine_versine(2.0, 1.0).build(&g).unwrap();
        let p = ModelParams::new(1.0, 2.0, 1.0, false).unwrap();
        assert_eq!(classify_regime(&p, &st2, &mut s).label, Some(RegimeLabel::NcCase1));
        // a = 1 < sqrt(2)
        assert_eq!(classify_regime(&p, &st, &mut s).label, None);

        let p = ModelParams::new(1.5, 1.0, 1.0, false).unwrap();
        let r = classify_regime(&p, &st, &mut s);
        assert_eq!(r.label, None);
        assert_eq!(r.label_str(), "none");
        assert!(r.hypothesis_report.iter().any(|h| !h.satisfied));

        let p = ModelParams::new(2.0, 2.0, 1.0, false).unwrap();
        assert_eq!(classify_regime(&p, &st2, &mut s).label, None);
    }

    #[test]
    fn classify_convective_cases() {
        let (g, mut s) = grid(64);
        let neg = InitPreset::sine_versine(-1.0, 1.0).build(&g).unwrap();
        let pos = InitPreset::sine_versine(1.0, 1.0).build(&g).unwrap();
        let p = ModelParams::new(2.0, 1.0, 1.0, true).unwrap();
        assert_eq!(classify_regime(&p, &neg, &mut s).label, Some(RegimeLabel::CThmA));
        assert_eq!(classify_regime(&p, &pos, &mut s).label, Some(RegimeLabel::CThmBa));
        let p = ModelParams::new(1.0, 1.0, 1.0, true).unwrap();
        assert_eq!(classify_regime(&p, &pos, &mut s).label, Some(RegimeLabel::CThmBb));
        // 3 kappa0 omega2 = 0.3 < 1
        let p = ModelParams::new(1.0, 1.0, 0.1, true).unwrap();
        assert_eq!(classify_regime(&p, &pos, &mut s).label, None);
        // 3 * 1 * 1 - 2 * 2 < 0
        let fast = InitPreset::sine_versine(2.0, 1.0).build(&g).unwrap();
        let p = ModelParams::new(2.0, 1.0, 1.0, true).unwrap();
        assert_eq!(classify_regime(&p, &fast, &mut s).label, None);
    }

    #[test]
    fn asymmetric_data_is_never_classified() {
        let (g, mut s) = grid(64);
        let p = ModelParams::new(2.0, 1.0, 1.0, false).unwrap();
        let st = State::new(
            &g,
            0.0,
            g.sample(|x| x.sin() + 1e-3 * x.cos()),
            g.sample(|x| 1.0 - x.cos()),
        )
        .unwrap();
        assert_eq!(classify_regime(&p, &st, &mut s).label, None);
    }

    #[test]
    fn label_round_trip_and_validation() {
        for l in RegimeLabel::ALL {
            assert_eq!(l.as_str().parse::<RegimeLabel>().unwrap(), l);
            let (a, b) = l.default_exponents();
            let p = ModelParams::new(a, b, 1.0, l.is_convective()).unwrap();
            l.validate_params(&p).unwrap();
        }
        let p = ModelParams::new(1.5, 1.0, 1.0, false).unwrap();
        assert!(RegimeLabel::NcCase3.validate_params(&p).is_err());
    }
}
