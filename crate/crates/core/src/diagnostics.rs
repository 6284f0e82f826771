//! Energy functionals, balance laws, positivity and symmetry monitors, and the
//! pointwise traces at `x = 0`.
//!
//! Integrating the equations over the torus, the two diffusion fluxes drop out
//! and the v-dissipation feeds the mass of omega one-to-one:
//!
//! ```text
//! d/dt |v|^2 = -2 int omega^alpha |v_x|^2,     d/dt int omega = int omega^alpha |v_x|^2
//! ```
//!
//! so `int omega + |v|^2 / 2` is conserved without convection. The flux
//! `kappa0 omega^beta omega_x` integrates to zero, so no omega-dissipation term
//! appears in the mass balance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Spectral;
use crate::model::{pow_clamped, ModelParams, State};

/// Energies and monitors of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `|v|^2 + |eta|^2`
    pub e0: f64,
    /// `|v_xx|^2 + |eta_xx|^2`
    pub e2: f64,
    /// `|v|_{H^2}^2 + |eta|_{H^2}^2`
    pub e_total: f64,
    pub v_l2_sq: f64,
    pub eta_l2_sq: f64,
    pub l1_omega: f64,
    /// signed `int omega`
    pub mass_omega: f64,
    /// `int omega^alpha |v_x|^2`
    pub dissipation_v: f64,
    /// `int omega^beta |omega_x|^2`
    pub dissipation_omega: f64,
    pub lyapunov_factor: f64,
    pub min_omega: f64,
    pub sym_odd: f64,
    pub sym_even: f64,
    pub spectral_tail: f64,
    pub v1: f64,
    pub omega2: f64,
    pub max_abs_vx: f64,
    pub max_abs_omega_xx: f64,
}

pub fn energy_report(params: &ModelParams, state: &State, calc: &mut Spectral) -> EnergyReport {
    let grid = *calc.grid();
    let n = grid.n();
    let eta = state.eta();
    let (mut vx, mut vxx) = (vec![0.0; n], vec![0.0; n]);
    let (mut ex, mut exx) = (vec![0.0; n], vec![0.0; n]);
    let (mut wx, mut wxx) = (vec![0.0; n], vec![0.0; n]);
    calc.derivatives_into(&state.v, &mut [&mut vx, &mut vxx]);
    calc.derivatives_into(&eta, &mut [&mut ex, &mut exx]);
    calc.derivatives_into(&state.omega, &mut [&mut wx, &mut wxx]);

    let sq = |f: &[f64]| grid.integrate(&f.iter().map(|x| x * x).collect::<Vec<_>>());
    let v_l2_sq = sq(&state.v);
    let eta_l2_sq = sq(&eta);
    let vx_sq = sq(&vx);
    let ex_sq = sq(&ex);
    let vxx_sq = sq(&vxx);
    let exx_sq = sq(&exx);

    let (alpha, beta) = (params.alpha(), params.beta());
    let mut diss_v = 0.0;
    let mut diss_w = 0.0;
    let mut grad_sq: f64 = 0.0;
    for j in 0..n {
        diss_v += pow_clamped(state.omega[j], alpha) * vx[j] * vx[j];
        diss_w += pow_clamped(state.omega[j], beta) * wx[j] * wx[j];
        grad_sq = grad_sq.max(vx[j] * vx[j] + ex[j] * ex[j]);
    }
    let h = grid.spacing();
    let eta_max = eta.iter().fold(0.0_f64, |m, x| m.max(*x));
    let lyapunov_factor =
        (pow_clamped(eta_max, 2.0 * alpha - 2.0) + pow_clamped(eta_max, 2.0 * beta - 2.0)) * grad_sq;

    let (tv, totv) = calc.spectral_tail(&state.v);
    let (tw, totw) = calc.spectral_tail(&state.omega);
    let spectral_tail = if totv + totw > 0.0 {
        (tv + tw) / (totv + totw)
    } else {
        0.0
    };
    let (sym_odd, sym_even) = grid.symmetry_errors(&state.v, &state.omega);
    let z = grid.zero_index();
    let maxabs = |f: &[f64]| f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));

    EnergyReport {
        t: state.time,
        e0: v_l2_sq + eta_l2_sq,
        e2: vxx_sq + exx_sq,
        e_total: v_l2_sq + eta_l2_sq + vx_sq + ex_sq + vxx_sq + exx_sq,
        v_l2_sq,
        eta_l2_sq,
        l1_omega: grid.norms(&state.omega).l1,
        mass_omega: grid.integrate(&state.omega),
        dissipation_v: h * diss_v,
        dissipation_omega: h * diss_w,
        lyapunov_factor,
        min_omega: state.min_omega(),
        sym_odd,
        sym_even,
        spectral_tail,
        v1: vx[z],
        omega2: wxx[z],
        max_abs_vx: maxabs(&vx),
        max_abs_omega_xx: maxabs(&wxx),
    }
}

/// `V^(0..3)` and `Omega^(0..3)` at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointValues {
    pub v: [f64; 4],
    pub omega: [f64; 4],
}

pub fn record_trace(state: &State, calc: &mut Spectral) -> PointValues {
    let mut out = PointValues::default();
    for j in 0..4 {
        out.v[j] = calc.trace_at_zero(&state.v, j);
        out.omega[j] = calc.trace_at_zero(&state.omega, j);
    }
    out
}

/// One row of the trace file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRow {
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

impl TraceRow {
    pub const HEADER: &'static str = "t,e0,e2,l1_omega,diss_v,diss_omega,V0,V1,V2,V3,O0,O1,O2,O3,min_omega,sym_odd,sym_even,spectral_tail";

    pub fn new(report: &EnergyReport, point: &PointValues) -> Self {
        Self {
            t: report.t,
            e0: report.e0,
            e2: report.e2,
            l1_omega: report.l1_omega,
            diss_v: report.dissipation_v,
            diss_omega: report.dissipation_omega,
            v: point.v,
            omega: point.omega,
            min_omega: report.min_omega,
            sym_odd: report.sym_odd,
            sym_even: report.sym_even,
            spectral_tail: report.spectral_tail,
        }
    }

    /// Row carrying only the reduced unknowns; every other column is NaN or zero.
    pub fn reduced(t: f64, v1: f64, omega2: f64) -> Self {
        let nan = f64::NAN;
        Self {
            t,
            e0: nan,
            e2: nan,
            l1_omega: nan,
            diss_v: nan,
            diss_omega: nan,
            v: [0.0, v1, 0.0, 0.0],
            omega: [0.0, 0.0, omega2, 0.0],
            min_omega: nan,
            sym_odd: 0.0,
            sym_even: 0.0,
            spectral_tail: nan,
        }
    }

    pub fn values(&self) -> [f64; 18] {
        [
            self.t,
            self.e0,
            self.e2,
            self.l1_omega,
            self.diss_v,
            self.diss_omega,
            self.v[0],
            self.v[1],
            self.v[2],
            self.v[3],
            self.omega[0],
            self.omega[1],
            self.omega[2],
            self.omega[3],
            self.min_omega,
            self.sym_odd,
            self.sym_even,
            self.spectral_tail,
        ]
    }

    pub fn from_values(x: &[f64; 18]) -> Self {
        Self {
            t: x[0],
            e0: x[1],
            e2: x[2],
            l1_omega: x[3],
            diss_v: x[4],
            diss_omega: x[5],
            v: [x[6], x[7], x[8], x[9]],
            omega: [x[10], x[11], x[12], x[13]],
            min_omega: x[14],
            sym_odd: x[15],
            sym_even: x[16],
            spectral_tail: x[17],
        }
    }
}

/// Time series of trace rows with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointTrace {
    pub rows: Vec<TraceRow>,
}

impl PointTrace {
    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().map_or(true, |r| r.t < row.t));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn v1(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.v[1]).collect()
    }

    pub fn omega2(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.omega[2]).collect()
    }

    /// Largest `|V0|, |V2|, |Omega0|, |Omega1|, |Omega3|` over the trace.
    pub fn max_vanishing_trace(&self) -> f64 {
        self.rows.iter().fold(0.0_f64, |m, r| {
            m.max(r.v[0].abs())
                .max(r.v[2].abs())
                .max(r.omega[0].abs())
                .max(r.omega[1].abs())
                .max(r.omega[3].abs())
        })
    }
}

/// `int omega + |v|^2 / 2`.
pub fn conserved_quantity(r: &EnergyReport) -> f64 {
    r.mass_omega + 0.5 * r.v_l2_sq
}

/// Largest deviation of `int omega + |v|^2 / 2` from its initial value.
pub fn conservation_residual(params: &ModelParams, history: &[EnergyReport]) -> Result<f64> {
    if params.convective() {
        return Err(Error::NotApplicable(
            "the mass-energy balance is not conserved with convection",
        ));
    }
    let Some(first) = history.first() else {
        return Ok(0.0);
    };
    let q0 = conserved_quantity(first);
    Ok(history
        .iter()
        .map(|r| (conserved_quantity(r) - q0).abs())
        .fold(0.0, f64::max))
}

/// Outcome of one inequality over the whole history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Largest `lhs - rhs` over samples (negative when the bound holds with room).
    pub max_excess: f64,
    pub violations: usize,
    pub first_violation_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub applicable: bool,
    pub samples: usize,
    pub tol: f64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }
}

struct Accum {
    check: InequalityCheck,
}

impl Accum {
    fn new(name: &str) -> Self {
        Self {
            check: InequalityCheck {
                name: name.into(),
                max_excess: f64::NEG_INFINITY,
                violations: 0,
                first_violation_t: None,
            },
        }
    }

    fn add(&mut self, t: f64, excess: f64) {
        self.check.max_excess = self.check.max_excess.max(excess);
        if excess > 0.0 || excess.is_nan() {
            self.check.violations += 1;
            self.check.first_violation_t.get_or_insert(t);
        }
    }
}

/// Checks along a non-convective history:
///
/// * `|v(t)|^2 + 2 int_0^t D_v <= |v0|^2 (1 + tol)`
/// * `|omega(t)|_1 <= |omega0|_1 + |v0|^2`
/// * `|eta(t)|^2 <= |eta0|^2 + |v0|^2`
/// * `int omega(t) - int_0^t D_v = int omega0` (two-sided)
///
/// Time integrals use the trapezoid rule on the samples, with a slack bounded
/// by the trapezoid error estimate from second differences.
pub fn energy_inequality_check(
    params: &ModelParams,
    history: &[EnergyReport],
    tol: f64,
) -> InequalityReport {
    let mut report = InequalityReport {
        applicable: !params.convective(),
        samples: history.len(),
        tol,
        checks: Vec::new(),
    };
    if params.convective() || history.is_empty() {
        return report;
    }
    let first = history[0];
    let mut v_energy = Accum::new("v_energy");
    let mut omega_l1 = Accum::new("omega_l1");
    let mut eta_l2 = Accum::new("eta_l2");
    let mut mass = Accum::new("mass_balance");

    let d: Vec<f64> = history.iter().map(|r| r.dissipation_v).collect();
    let mut integral = 0.0;
    let mut slack = 0.0;
    let v0 = first.v_l2_sq;
    let scale_w = first.l1_omega.max(v0).max(1.0);
    for (k, r) in history.iter().enumerate() {
        if k > 0 {
            let dt = r.t - history[k - 1].t;
            integral += 0.5 * dt * (d[k] + d[k - 1]);
            // second difference around the interval, reused at the ends
            let c = if history.len() < 3 {
                0.0
            } else {
                let i = k.clamp(1, history.len() - 2);
                (d[i + 1] - 2.0 * d[i] + d[i - 1]).abs()
            };
            slack += 2.0 * dt * c / 12.0;
        }
        let abs_tol = tol * scale_w;
        v_energy.add(r.t, r.v_l2_sq + 2.0 * integral - v0 * (1.0 + tol) - 2.0 * slack - abs_tol);
        omega_l1.add(r.t, r.l1_omega - first.l1_omega - v0 - abs_tol);
        eta_l2.add(r.t, r.eta_l2_sq - first.eta_l2_sq - v0 - abs_tol);
        mass.add(
            r.t,
            (r.mass_omega - integral - first.mass_omega).abs() - slack - abs_tol,
        );
    }
    report.checks = vec![v_energy.check, omega_l1.check, eta_l2.check, mass.check];
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (PeriodicGrid, Spectral) {
        let g = PeriodicGrid::new(n).unwrap();
        (g, Spectral::new(g))
    }

    #[test]
    fn report_examples() {
        let (g, mut s) = setup(64);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let st = State::new(&g, 0.0, g.sample(f64::sin), vec![0.0; 64]).unwrap();
        let r = energy_report(&p, &st, &mut s);
        assert_abs_diff_eq!(r.e0, PI, epsilon = 1e-12);
        assert_eq!(r.l1_omega, 0.0);
        assert_eq!(r.dissipation_v, 0.0);

        // int (1 - cos x) sin^2 x = pi
        let st = State::new(&g, 0.0, vec![0.0; 64], g.sample(|x| 1.0 - x.cos())).unwrap();
        let r = energy_report(&p, &st, &mut s);
        assert_abs_diff_eq!(r.dissipation_omega, PI, epsilon = 1e-12);
        assert_abs_diff_eq!(r.omega2, 1.0, epsilon = 1e-12);

        let st = State::new(&g, 0.0, g.sample(f64::sin), vec![1.0; 64]).unwrap();
        let r = energy_report(&p, &st, &mut s);
        assert_abs_diff_eq!(r.dissipation_v, PI, epsilon = 1e-12);
        assert_abs_diff_eq!(r.v1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn e_total_is_equivalent_to_e0_plus_e2() {
        let (g, mut s) = setup(64);
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        for k in 1..6 {
            let kf = k as f64;
            let st = State::new(
                &g,
                0.0,
                g.sample(|x| (kf * x).sin()),
                g.sample(|x| 2.0 + (kf * x).cos()),
            )
            .unwrap();
            let r = energy_report(&p, &st, &mut s);
            assert!(r.e0 + r.e2 <= r.e_total * (1.0 + 1e-12));
            assert!(r.e_total <= 1.5 * (r.e0 + r.e2));
        }
    }

    #[test]
    fn trace_row_of_sine_and_versine() {
        let (g, mut s) = setup(64);
        let st = State::new(&g, 0.0, g.sample(f64::sin), g.sample(|x| 1.0 - x.cos())).unwrap();
        let p = record_trace(&st, &mut s);
        let want_v = [0.0, 1.0, 0.0, -1.0];
        let want_w = [0.0, 0.0, 1.0, 0.0];
        for j in 0..4 {
            assert_abs_diff_eq!(p.v[j], want_v[j], epsilon = 1e-12);
            assert_abs_diff_eq!(p.omega[j], want_w[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_and_inequalities_on_trivial_history() {
        let p = ModelParams::new(1.0, 1.0, 1.0, false).unwrap();
        let h = vec![EnergyReport::default(); 4];
        assert_eq!(conservation_residual(&p, &h).unwrap(), 0.0);
        let rep = energy_inequality_check(&p, &h, 1e-6);
        assert!(rep.holds());
        let pc = ModelParams::new(1.0, 1.0, 1.0, true).unwrap();
        assert!(matches!(
            conservation_residual(&pc, &h),
            Err(Error::NotApplicable(_))
        ));
        assert!(!energy_inequality_check(&pc, &h, 1e-6).applicable);
    }

    #[test]
    fn trace_row_round_trip() {
        let row = TraceRow::reduced(0.5, 2.0, 3.0);
        let back = TraceRow::from_values(&row.values());
        assert_eq!(back.values().map(f64::to_bits), row.values().map(f64::to_bits));
        assert_eq!(TraceRow::HEADER.split(',').count(), 18);
    }
}
