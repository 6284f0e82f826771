//! Symmetric initial data and the canonical blow-up experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::integrator::{Integrator, RunOutcome, StepControl};
use crate::model::{ModelParams, RegimeLabel, State};

/// Initial data: `v0` from sine modes, `omega0` from cosine modes with the
/// constant fixed so that `omega0(0) = 0`.
///
/// Without explicit lists the preset is `v0 = a sin x`, `omega0 = b (1 - cos x)`.
/// `omega_cosine[k-1]` is the coefficient of `cos kx`; the constant term is
/// minus their sum. `omega_offset` lifts the whole profile (it breaks
/// `omega0(0) = 0` and is meant for runs away from the degenerate regime).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitPreset {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub v_sine: Vec<f64>,
    pub omega_cosine: Vec<f64>,
    pub omega_offset: f64,
}

impl Default for InitPreset {
    fn default() -> Self {
        Self::sine_versine(1.0, 1.0)
    }
}

impl InitPreset {
    pub fn sine_versine(a: f64, b: f64) -> Self {
        Self {
            name: "sine-versine".into(),
            a,
            b,
            v_sine: Vec::new(),
            omega_cosine: Vec::new(),
            omega_offset: 0.0,
        }
    }

    pub fn custom(v_sine: Vec<f64>, omega_cosine: Vec<f64>) -> Self {
        Self {
            name: "custom".into(),
            a: 0.0,
            b: 0.0,
            v_sine,
            omega_cosine,
            omega_offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.omega_offset = offset;
        self
    }

    fn sine_modes(&self) -> Vec<f64> {
        if self.v_sine.is_empty() {
            vec![self.a]
        } else {
            self.v_sine.clone()
        }
    }

    fn cosine_modes(&self) -> Vec<f64> {
        if self.omega_cosine.is_empty() {
            vec![-self.b]
        } else {
            self.omega_cosine.clone()
        }
    }

    /// `V^(1)(0) = sum k s_k`.
    pub fn v1(&self) -> f64 {
        self.sine_modes()
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1) as f64 * s)
            .sum()
    }

    /// `Omega^(2)(0) = -sum k^2 c_k`.
    pub fn omega2(&self) -> f64 {
        self.cosine_modes()
            .iter()
            .enumerate()
            .map(|(i, c)| -((i + 1) as f64).powi(2) * c)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.omega_offset];
        if all
            .iter()
            .chain(&self.v_sine)
            .chain(&self.omega_cosine)
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter {
                name: "init",
                reason: "coefficients must be finite".into(),
            });
        }
        Ok(())
    }

    /// Synthesizes the fields on the positive half of the grid and mirrors them,
    /// so `v` is exactly odd and `omega` exactly even.
    pub fn build(&self, grid: &PeriodicGrid) -> Result<State> {
        self.validate()?;
        let n = grid.n();
        let h = grid.spacing();
        let mid = grid.zero_index();
        let sines = self.sine_modes();
        let cosines = self.cosine_modes();

        let v_at = |x: f64| -> f64 {
            sines
                .iter()
                .enumerate()
                .map(|(i, s)| s * ((i + 1) as f64 * x).sin())
                .sum()
        };
        // c (cos kx - 1) = -2 c sin^2(kx/2) vanishes exactly at x = 0
        let w_at = |x: f64| -> f64 {
            cosines
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let s = (0.5 * (i + 1) as f64 * x).sin();
                    -2.0 * c * s * s
                })
                .sum::<f64>()
                + self.omega_offset
        };

        let mut v = vec![0.0; n];
        let mut omega = vec![0.0; n];
        omega[mid] = w_at(0.0);
        for j in 1..mid {
            let x = j as f64 * h;
            let (vv, ww) = (v_at(x), w_at(x));
            v[mid + j] = vv;
            v[mid - j] = -vv;
            omega[mid + j] = ww;
            omega[mid - j] = ww;
        }
        // x = -pi is its own mirror image: an odd field vanishes there
        omega[0] = w_at(std::f64::consts::PI);

        let min = omega.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(Error::NegativeOmega { min, floor: 0.0 });
        }
        State::new(grid, 0.0, v, omega)
    }
}

/// One complete experiment: system, resolution, data and stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub case: Option<RegimeLabel>,
    pub params: ModelParams,
    pub n: usize,
    pub init: InitPreset,
    pub control: StepControl,
    /// 2/3-rule filtering of the nonlinear terms.
    pub dealias: bool,
}

impl Scenario {
    /// Reference experiment for each theorem case at `n = 1024`.
    ///
    /// Dealiasing is off: near the singular point the truncated upper third of
    /// the spectrum carries more of the solution than aliasing corrupts, and the
    /// unfiltered runs track the reduced ODE several times more closely.
    ///
    /// The convective Burgers case uses `kappa0 = 0.05` so that the curvature
    /// singularity (near `t = 0.87`) comes after the gradient window `t <= 0.8`.
    pub fn canonical(label: RegimeLabel) -> Scenario {
        let (alpha, beta) = label.default_exponents();
        let (a, b, kappa0, t_end) = match label {
            RegimeLabel::NcCase3 => (1.0, 1.0, 1.0, 0.332),
            RegimeLabel::NcCase1 => (2.0, 1.0, 1.0, 0.345),
            RegimeLabel::NcCase2 => (1.0, 1.0, 1.0, 0.3),
            RegimeLabel::CThmA => (-1.0, 1.0, 0.05, 0.8),
            RegimeLabel::CThmBa => (1.0, 1.0, 1.0, 0.5),
            RegimeLabel::CThmBb => (1.0, 1.0, 1.0, 0.3),
        };
        let params = ModelParams::new(alpha, beta, kappa0, label.is_convective())
            .expect("canonical parameters are valid");
        Scenario {
            name: label.as_str().to_ascii_lowercase(),
            case: Some(label),
            params,
            n: 1024,
            init: InitPreset::sine_versine(a, b),
            control: StepControl {
                t_end,
                stop_threshold: 1e4,
                sample_interval: 1e-3,
                ..StepControl::default()
            },
            dealias: false,
        }
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n)
    }

    pub fn initial_state(&self) -> Result<State> {
        self.init.build(&self.grid()?)
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(self.params, self.control, self.grid()?, self.dealias)
    }

    pub fn run(&self) -> Result<RunOutcome> {
        let initial = self.initial_state()?;
        Ok(self.integrator()?.run(initial, &mut []))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spectral;
    use approx::assert_abs_diff_eq;

    #[test]
    fn versine_preset_traces() {
        let g = PeriodicGrid::new(128).unwrap();
        let mut s = Spectral::new(g);
        let st = InitPreset::sine_versine(1.0, 1.0).build(&g).unwrap();
        assert_eq!(s.trace_at_zero(&st.omega, 0).abs() < 1e-14, true);
        assert_abs_diff_eq!(s.trace_at_zero(&st.omega, 2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.trace_at_zero(&st.v, 1), 1.0, epsilon = 1e-12);
        assert_eq!(g.symmetry_errors(&st.v, &st.omega), (0.0, 0.0));
        assert_eq!(st.omega[g.zero_index()], 0.0);
    }

    #[test]
    fn custom_cosine_list() {
        let g = PeriodicGrid::new(64).unwrap();
        let mut s = Spectral::new(g);
        let p = InitPreset::custom(vec![1.0], vec![-0.5, -0.5]);
        let st = p.build(&g).unwrap();
        assert_abs_diff_eq!(p.omega2(), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.trace_at_zero(&st.omega, 2), 2.5, epsilon = 1e-12);
        assert!(st.min_omega() >= 0.0);
        for (j, x) in g.nodes().into_iter().enumerate() {
            let w = 1.0 - 0.5 * x.cos() - 0.5 * (2.0 * x).cos();
            assert_abs_diff_eq!(st.omega[j], w, epsilon = 1e-14);
        }
    }

    #[test]
    fn negative_omega_is_rejected() {
        let g = PeriodicGrid::new(64).unwrap();
        // 1 - cos x shifted by the cos 2x mode dips below zero
        let p = InitPreset::custom(vec![1.0], vec![-0.1, 0.5]);
        assert!(matches!(p.build(&g), Err(Error::NegativeOmega { .. })));
    }

    #[test]
    fn offset_lifts_the_minimum() {
        let g = PeriodicGrid::new(64).unwrap();
        let st = InitPreset::sine_versine(1.0, 1.0).with_offset(0.5).build(&g).unwrap();
        assert_abs_diff_eq!(st.min_omega(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn canonical_scenarios_classify_as_labelled() {
        for label in RegimeLabel::ALL {
            let mut sc = Scenario::canonical(label);
            sc.n = 64;
            let g = sc.grid().unwrap();
            let mut s = Spectral::new(g);
            let st = sc.initial_state().unwrap();
            let got = crate::model::classify_regime(&sc.params, &st, &mut s);
            assert_eq!(got.label, Some(label), "{label}");
        }
    }
}
