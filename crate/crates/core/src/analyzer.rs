//! Singular-time and rate estimation from traces, and adjudication against the
//! reduced-system oracle.

use serde::{Deserialize, Serialize};

use crate::diagnostics::PointTrace;
use crate::error::{Error, Result};
use crate::model::{ModelParams, RegimeLabel};
use crate::oracle::{closed_form, integrate_reduced_at, ClosedForm, OdeOptions, ReducedState, SingularTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    MatchesOracle,
    BoundSatisfied,
    Inconclusive,
    Violation,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::MatchesOracle => "MatchesOracle",
            Verdict::BoundSatisfied => "BoundSatisfied",
            Verdict::Inconclusive => "Inconclusive",
            Verdict::Violation => "Violation",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FitWindow {
    /// Trailing samples with `Omega^(2) >= Omega^(2)_last / 10`.
    LastDecade,
    Range { start: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub window: FitWindow,
    /// Relative tolerance on the singular time.
    pub rel_tol: f64,
    /// Growth factor of `Omega^(2)` required inside the trace.
    pub min_growth: f64,
    pub reference: SingularTime,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            window: FitWindow::LastDecade,
            rel_tol: 0.02,
            min_growth: 10.0,
            reference: SingularTime::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t0_hat: f64,
    pub exponent_hat: f64,
    pub fit_window: (f64, f64),
    /// RMS misfit of `1/Omega^(2)` relative to its value at the window start.
    pub residual: f64,
    pub samples: usize,
    pub verdict: Verdict,
    pub reference: SingularTime,
    pub spectral_tail_end: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let m = sxy / sxx;
    (m, my - m * mx)
}

/// Fits `1/Omega^(2)(t) = m t + b` on the window and sets `t0 = -b/m`; the
/// exponent comes from regressing `log Omega^(2)` on `log(t0 - t)`.
pub fn fit_blowup(trace: &PointTrace, config: &FitConfig) -> Result<BlowupEstimate> {
    let rows = &trace.rows;
    let w: Vec<f64> = rows.iter().map(|r| r.omega[2]).collect();
    let finite_pos: Vec<f64> = w.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    let (lo, hi) = finite_pos
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), x| (a.min(*x), b.max(*x)));
    let ratio = if finite_pos.is_empty() { 1.0 } else { hi / lo };
    // relative slack so that exactly tenfold growth qualifies
    if !(ratio >= config.min_growth * (1.0 - 1e-9)) {
        return Err(Error::InsufficientGrowth {
            ratio,
            required: config.min_growth,
        });
    }

    let idx: Vec<usize> = match config.window {
        FitWindow::LastDecade => {
            let last = *w.last().unwrap_or(&0.0);
            let cut = last / 10.0 * (1.0 - 1e-12);
            let mut start = rows.len();
            while start > 0 && w[start - 1].is_finite() && w[start - 1] >= cut && w[start - 1] > 0.0 {
                start -= 1;
            }
            (start..rows.len()).collect()
        }
        FitWindow::Range { start, end } => (0..rows.len())
            .filter(|&i| rows[i].t >= start && rows[i].t <= end && w[i] > 0.0)
            .collect(),
    };
    if idx.len() < 3 {
        return Err(Error::InsufficientGrowth {
            ratio,
            required: config.min_growth,
        });
    }
    let t: Vec<f64> = idx.iter().map(|&i| rows[i].t).collect();
    let inv: Vec<f64> = idx.iter().map(|&i| 1.0 / w[i]).collect();
    let (m, b) = linear_fit(&t, &inv);
    if !(m < 0.0) {
        return Err(Error::InsufficientGrowth {
            ratio,
            required: config.min_growth,
        });
    }
    let t0_hat = -b / m;

    let scale = inv[0].abs().max(f64::MIN_POSITIVE);
    let residual = (t
        .iter()
        .zip(&inv)
        .map(|(ti, yi)| ((m * ti + b - yi) / scale).powi(2))
        .sum::<f64>()
        / t.len() as f64)
        .sqrt();

    let (lx, ly): (Vec<f64>, Vec<f64>) = idx
        .iter()
        .filter(|&&i| t0_hat - rows[i].t > 0.0)
        .map(|&i| ((t0_hat - rows[i].t).ln(), w[i].ln()))
        .unzip();
    let exponent_hat = if lx.len() >= 2 {
        linear_fit(&lx, &ly).0
    } else {
        f64::NAN
    };

    let verdict = match config.reference {
        SingularTime::Exact(t0) => {
            if ((t0_hat - t0) / t0).abs() <= config.rel_tol {
                Verdict::MatchesOracle
            } else {
                Verdict::Violation
            }
        }
        SingularTime::AtMost(t0) => {
            if t0_hat <= t0 * (1.0 + config.rel_tol) {
                Verdict::BoundSatisfied
            } else {
                Verdict::Violation
            }
        }
        SingularTime::None => Verdict::Inconclusive,
    };

    let last = *idx.last().unwrap();
    Ok(BlowupEstimate {
        t0_hat,
        exponent_hat,
        fit_window: (t[0], *t.last().unwrap()),
        residual,
        samples: idx.len(),
        verdict,
        reference: config.reference,
        spectral_tail_end: rows[last].spectral_tail,
    })
}

/// Reference values of the reduced system on the trace times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSeries {
    pub label: Option<RegimeLabel>,
    /// Solution of the reduced system (closed form when exact, else numerical).
    pub solution: Vec<ReducedState>,
    /// Lower envelope for the cases where only a bound is proved.
    pub envelope: Option<Vec<ReducedState>>,
    pub first_integral: Option<f64>,
    pub singular_time: SingularTime,
}

/// Builds the oracle series on the trace's times from its first row.
pub fn oracle_series(params: &ModelParams, trace: &PointTrace, tol: f64) -> Result<OracleSeries> {
    let first = trace.rows.first().ok_or(Error::InsufficientGrowth {
        ratio: 1.0,
        required: 10.0,
    })?;
    let ini = ReducedState::new(first.t, first.v[1], first.omega[2]);
    let times = trace.times();
    let cf: Option<ClosedForm> = closed_form(params, &ini).ok();
    let label = crate::model::classify_point(
        params,
        &crate::model::SymmetryPointData::symmetric(ini.v1, ini.omega2),
    )
    .label;

    let eval = |cf: &ClosedForm| -> Vec<ReducedState> {
        times
            .iter()
            .map(|&t| {
                let (v, w) = cf.evaluate(t);
                ReducedState::new(t, v, w)
            })
            .filter(|r| r.v1.is_finite() && r.omega2.is_finite())
            .collect()
    };

    let (solution, envelope, first_integral, singular_time) = match &cf {
        Some(cf) if cf.is_exact() => (eval(cf), None, cf.first_integral, cf.singular_time),
        _ => {
            let s = integrate_reduced_at(
                params,
                &ini,
                &times,
                &OdeOptions {
                    rel_tol: tol,
                    threshold: 1e12,
                    ..OdeOptions::default()
                },
            )?;
            match &cf {
                Some(cf) => (s.points, Some(eval(cf)), cf.first_integral, cf.singular_time),
                None => (s.points, None, None, SingularTime::None),
            }
        }
    };
    Ok(OracleSeries {
        label,
        solution,
        envelope,
        first_integral,
        singular_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub omega2_cap: f64,
    pub samples: usize,
    pub max_rel_err_v1: f64,
    pub max_rel_err_omega2: f64,
    /// `min (Omega_pde - envelope)` over the window.
    pub envelope_margin: Option<f64>,
    /// `min Omega_pde / envelope` over the window.
    pub envelope_ratio: Option<f64>,
    /// `max |V(t) - V(0)|` over the window.
    pub v1_drift: f64,
    /// `max |(Omega - V^2/2)(t) - (Omega - V^2/2)(0)|` over the window, for
    /// `alpha = 1`, `beta >= 2`.
    pub first_integral_drift: Option<f64>,
    /// For `alpha = 1`: `|V|` grows at every sample where `Omega` grows.
    pub growth_linked: Option<bool>,
}

fn rel_err(x: f64, r: f64) -> f64 {
    let d = (x - r).abs();
    if r.abs() > 1e-12 {
        d / r.abs()
    } else {
        d
    }
}

/// Compares a trace against the oracle on the samples with `Omega^(2) <= omega2_cap`.
pub fn compare_with_oracle(
    params: &ModelParams,
    trace: &PointTrace,
    oracle: &OracleSeries,
    omega2_cap: f64,
) -> ComparisonReport {
    let rows: Vec<_> = trace
        .rows
        .iter()
        .take_while(|r| r.omega[2].is_finite() && r.omega[2] <= omega2_cap)
        .collect();
    let mut rep = ComparisonReport {
        omega2_cap,
        samples: 0,
        max_rel_err_v1: 0.0,
        max_rel_err_omega2: 0.0,
        envelope_margin: None,
        envelope_ratio: None,
        v1_drift: 0.0,
        first_integral_drift: None,
        growth_linked: None,
    };
    let Some(first) = rows.first() else {
        return rep;
    };

    let find = |series: &[ReducedState], t: f64| series.iter().find(|p| p.t == t).copied();
    for r in &rows {
        rep.v1_drift = rep.v1_drift.max((r.v[1] - first.v[1]).abs());
        if let Some(p) = find(&oracle.solution, r.t) {
            rep.samples += 1;
            rep.max_rel_err_v1 = rep.max_rel_err_v1.max(rel_err(r.v[1], p.v1));
            rep.max_rel_err_omega2 = rep.max_rel_err_omega2.max(rel_err(r.omega[2], p.omega2));
        }
        if let Some(env) = &oracle.envelope {
            if let Some(p) = find(env, r.t) {
                let m = r.omega[2] - p.omega2;
                rep.envelope_margin = Some(rep.envelope_margin.map_or(m, |x: f64| x.min(m)));
                if p.omega2 > 0.0 {
                    let q = r.omega[2] / p.omega2;
                    rep.envelope_ratio = Some(rep.envelope_ratio.map_or(q, |x: f64| x.min(q)));
                }
            }
        }
    }

    if !params.convective() && params.alpha() == 1.0 && params.beta() >= 2.0 {
        let i0 = first.omega[2] - 0.5 * first.v[1] * first.v[1];
        let d = rows
            .iter()
            .map(|r| (r.omega[2] - 0.5 * r.v[1] * r.v[1] - i0).abs())
            .fold(0.0, f64::max);
        rep.first_integral_drift = Some(d);
    }
    if params.alpha() == 1.0 && first.v[1] != 0.0 {
        let linked = rows.windows(2).all(|p| {
            let dw = p[1].omega[2] - p[0].omega[2];
            let dv = p[1].v[1].abs() - p[0].v[1].abs();
            dw <= 0.0 || dv >= 0.0
        });
        rep.growth_linked = Some(linked);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TraceRow;
    use approx::assert_abs_diff_eq;

    fn synthetic(f: impl Fn(f64) -> (f64, f64), t_end: f64, n: usize) -> PointTrace {
        let mut tr = PointTrace::default();
        for k in 0..=n {
            let t = t_end * k as f64 / n as f64;
            let (v, w) = f(t);
            tr.push(TraceRow::reduced(t, v, w));
        }
        tr
    }

    #[test]
    fn fits_its_own_model_class() {
        let tr = synthetic(|t| (1.0, 1.0 / (1.0 - 3.0 * t)), 0.3, 300);
        let cfg = FitConfig {
            reference: SingularTime::Exact(1.0 / 3.0),
            ..FitConfig::default()
        };
        let e = fit_blowup(&tr, &cfg).unwrap();
        assert_abs_diff_eq!(e.t0_hat, 1.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(e.exponent_hat, -1.0, epsilon = 1e-3);
        assert_eq!(e.verdict, Verdict::MatchesOracle);
        assert!(e.residual >= 0.0 && e.residual < 1e-10);
    }

    #[test]
    fn constant_trace_has_insufficient_growth() {
        let tr = synthetic(|_| (1.0, 2.0), 0.3, 30);
        assert!(matches!(
            fit_blowup(&tr, &FitConfig::default()),
            Err(Error::InsufficientGrowth { .. })
        ));
    }

    #[test]
    fn bound_verdicts() {
        let tr = synthetic(|t| (1.0, 1.0 / (1.0 - 4.0 * t)), 0.24, 240);
        let mut cfg = FitConfig {
            reference: SingularTime::AtMost(1.0 / 3.0),
            ..FitConfig::default()
        };
        assert_eq!(fit_blowup(&tr, &cfg).unwrap().verdict, Verdict::BoundSatisfied);
        cfg.reference = SingularTime::AtMost(0.2);
        assert_eq!(fit_blowup(&tr, &cfg).unwrap().verdict, Verdict::Violation);
        cfg.reference = SingularTime::None;
        assert_eq!(fit_blowup(&tr, &cfg).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn explicit_window() {
        let tr = synthetic(|t| (1.0, 1.0 / (1.0 - 3.0 * t) + 0.0), 0.32, 320);
        let cfg = FitConfig {
            window: FitWindow::Range { start: 0.1, end: 0.2 },
            ..FitConfig::default()
        };
        let e = fit_blowup(&tr, &cfg).unwrap();
        assert_abs_diff_eq!(e.fit_window.0, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(e.t0_hat, 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn comparison_against_exact_series() {
        let params = ModelParams::new(2.0, 1.0, 1.0, false).unwrap();
        let tr = synthetic(|t| (1.0, 1.0 / (1.0 - 3.0 * t)), 0.3, 30);
        let o = oracle_series(&params, &tr, 1e-10).unwrap();
        assert_eq!(o.label, Some(RegimeLabel::NcCase3));
        let rep = compare_with_oracle(&params, &tr, &o, 1e3);
        assert_eq!(rep.samples, 31);
        assert!(rep.max_rel_err_omega2 < 1e-13);
        assert_eq!(rep.v1_drift, 0.0);
        assert!(rep.envelope_margin.is_none());
    }

    #[test]
    fn comparison_reports_envelope_and_first_integral() {
        let params = ModelParams::new(1.0, 2.0, 1.0, false).unwrap();
        // exact reduced solution: Omega = 1/(2 e^{-2t} - 1), V^2 = 2(Omega + 1)
        let tr = synthetic(
            |t| {
                let w = 1.0 / (2.0 * (-2.0 * t).exp() - 1.0);
                ((2.0 * (w + 1.0)).sqrt(), w)
            },
            0.3,
            300,
        );
        let o = oracle_series(&params, &tr, 1e-12).unwrap();
        let rep = compare_with_oracle(&params, &tr, &o, 1e3);
        assert!(rep.max_rel_err_omega2 < 1e-8, "{}", rep.max_rel_err_omega2);
        assert!(rep.first_integral_drift.unwrap() < 1e-12);
        assert!(rep.envelope_margin.unwrap() >= 0.0);
        assert_eq!(rep.growth_linked, Some(true));
    }
}
