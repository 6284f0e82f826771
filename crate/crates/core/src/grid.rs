//! Periodic grid on the torus `[-pi, pi)` and Fourier-collocation calculus.
//!
//! Nodes are `x_j = -pi + j * 2pi/n`, so `x = 0` is node `n/2` and the
//! reflection `x -> -x` maps node `j` to node `(n - j) mod n` exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Uniform periodic grid with an even number of nodes, `n >= 16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

/// Discrete norms with quadrature weight `2pi/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl PeriodicGrid {
    pub const MIN_SIZE: usize = 16;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_SIZE || n % 2 != 0 {
            return Err(Error::InvalidGridSize(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Index of the node sitting at `x = 0`.
    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    /// Index of the node at `-x_j`.
    pub fn reflect(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Largest wavenumber kept by the 2/3 rule. Products of two fields band-limited
    /// to this degree are alias-free on the retained modes.
    pub fn dealias_cutoff(&self) -> usize {
        (self.n - 1) / 3
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|j| f(self.node(j))).collect()
    }

    pub fn check_len(&self, field: &'static str, f: &[f64]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::LengthMismatch {
                field,
                expected: self.n,
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Rectangle rule, spectrally exact for trigonometric polynomials of degree < n.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.spacing() * f.iter().sum::<f64>()
    }

    pub fn norms(&self, f: &[f64]) -> Norms {
        let h = self.spacing();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf: f64 = 0.0;
        for &x in f {
            let a = x.abs();
            l1 += a;
            l2 += a * a;
            linf = linf.max(a);
        }
        Norms {
            l1: h * l1,
            l2: (h * l2).sqrt(),
            linf,
        }
    }

    /// Discrete `L^p` norm; `p = inf` gives the max norm.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        }
        let s: f64 = f.iter().map(|x| x.abs().powf(p)).sum();
        (self.spacing() * s).powf(1.0 / p)
    }

    /// `(max |v(x) + v(-x)|, max |omega(x) - omega(-x)|)` over node pairs.
    pub fn symmetry_errors(&self, v: &[f64], omega: &[f64]) -> (f64, f64) {
        let mut odd: f64 = 0.0;
        let mut even: f64 = 0.0;
        for j in 0..self.n {
            let r = self.reflect(j);
            odd = odd.max((v[j] + v[r]).abs());
            even = even.max((omega[j] - omega[r]).abs());
        }
        (odd, even)
    }
}

/// Fourier-collocation derivative provider with its own FFT workspace.
///
/// Each caller owns one; clones share the FFT plans but not the scratch buffers.
#[derive(Clone)]
pub struct Spectral {
    grid: PeriodicGrid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    real_buf: Vec<f64>,
    coeffs: Vec<Complex64>,
    work: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
    dealias: bool,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c = planner.plan_fft_forward(grid.n());
        let c2r = planner.plan_fft_inverse(grid.n());
        let scratch_fwd = r2c.make_scratch_vec();
        let scratch_inv = c2r.make_scratch_vec();
        let m = grid.n() / 2 + 1;
        Self {
            grid,
            r2c,
            c2r,
            real_buf: vec![0.0; grid.n()],
            coeffs: vec![Complex64::new(0.0, 0.0); m],
            work: vec![Complex64::new(0.0, 0.0); m],
            scratch_fwd,
            scratch_inv,
            dealias: true,
        }
    }

    /// Enables or disables 2/3-rule filtering of nonlinear fluxes and sources.
    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn forward(&mut self, f: &[f64]) {
        assert_eq!(f.len(), self.grid.n(), "field length must match the grid");
        self.real_buf.copy_from_slice(f);
        self.r2c
            .process_with_scratch(&mut self.real_buf, &mut self.coeffs, &mut self.scratch_fwd)
            .expect("forward FFT buffers are sized by the plan");
    }

    /// Inverse transform of `self.work` into `out`, normalised.
    fn inverse_work(&mut self, out: &mut [f64]) {
        let m = self.work.len();
        self.work[0].im = 0.0;
        self.work[m - 1].im = 0.0;
        self.c2r
            .process_with_scratch(&mut self.work, out, &mut self.scratch_inv)
            .expect("inverse FFT buffers are sized by the plan");
        let scale = 1.0 / self.grid.n() as f64;
        out.iter_mut().for_each(|x| *x *= scale);
    }

    /// Fills `self.work` with `(ik)^order * coeffs`, optionally truncated to the
    /// dealiasing band. The Nyquist mode of odd-order derivatives is zeroed.
    fn apply_derivative(&mut self, order: usize, truncate: bool) {
        let cutoff = if truncate {
            self.grid.dealias_cutoff()
        } else {
            self.grid.n() / 2
        };
        self.apply_derivative_band(order, cutoff);
    }

    fn apply_derivative_band(&mut self, order: usize, cutoff: usize) {
        let nyquist = self.grid.n() / 2;
        for (k, (w, c)) in self.work.iter_mut().zip(&self.coeffs).enumerate() {
            if k > cutoff || (k == nyquist && order % 2 == 1) {
                *w = Complex64::new(0.0, 0.0);
                continue;
            }
            let kp = (k as f64).powi(order as i32);
            *w = match order % 4 {
                0 => *c * kp,
                1 => Complex64::new(-c.im * kp, c.re * kp),
                2 => -*c * kp,
                _ => Complex64::new(c.im * kp, -c.re * kp),
            };
        }
    }

    pub fn differentiate_into(&mut self, f: &[f64], order: usize, out: &mut [f64]) {
        self.forward(f);
        self.apply_derivative(order, false);
        self.inverse_work(out);
    }

    /// Spectral derivative of the given order; exact on trigonometric polynomials
    /// of degree `< n/2`.
    pub fn differentiate(&mut self, f: &[f64], order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n()];
        self.differentiate_into(f, order, &mut out);
        out
    }

    /// Derivative with every mode above `band` discarded.
    pub fn differentiate_band(&mut self, f: &[f64], order: usize, band: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n()];
        self.forward(f);
        self.apply_derivative_band(order, band);
        self.inverse_work(&mut out);
        out
    }

    /// Derivatives of orders `1..=outs.len()` from a single forward transform.
    pub fn derivatives_into(&mut self, f: &[f64], outs: &mut [&mut [f64]]) {
        self.forward(f);
        for (i, out) in outs.iter_mut().enumerate() {
            self.apply_derivative(i + 1, false);
            self.inverse_work(out);
        }
    }

    /// `d/dx` of a pointwise-formed flux; the flux is low-pass filtered first when
    /// dealiasing is on.
    pub fn flux_divergence_into(&mut self, flux: &[f64], out: &mut [f64]) {
        self.forward(flux);
        let truncate = self.dealias;
        self.apply_derivative(1, truncate);
        self.inverse_work(out);
    }

    /// Low-pass filters a pointwise product in place when dealiasing is on.
    pub fn filter_in_place(&mut self, f: &mut [f64]) {
        if !self.dealias {
            return;
        }
        self.forward(f);
        self.apply_derivative(0, true);
        self.inverse_work(f);
    }

    /// Pointwise product with the upper third of the spectrum removed afterwards.
    /// Always filters, independent of the dealias switch.
    pub fn multiply_dealiased(&mut self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        self.forward(&prod);
        self.apply_derivative(0, true);
        let mut out = vec![0.0; self.grid.n()];
        self.inverse_work(&mut out);
        out
    }

    /// Value of the `order`-th spectral derivative at the node `x = 0`.
    pub fn trace_at_zero(&mut self, f: &[f64], order: usize) -> f64 {
        self.forward(f);
        self.apply_derivative(order, false);
        let n = self.grid.n();
        let nyquist = n / 2;
        // e^{i k x} at node n/2 of the DFT index is (-1)^k
        let mut acc = self.work[0].re;
        for k in 1..nyquist {
            let s = if k % 2 == 0 { 2.0 } else { -2.0 };
            acc += s * self.work[k].re;
        }
        let s = if nyquist % 2 == 0 { 1.0 } else { -1.0 };
        acc += s * self.work[nyquist].re;
        acc / n as f64
    }

    /// `(energy in the top decile of resolved modes, total energy)`. The resolved
    /// band is `[0, n/3]` with dealiasing, `[0, n/2]` without.
    pub fn spectral_tail(&mut self, f: &[f64]) -> (f64, f64) {
        self.forward(f);
        let top = if self.dealias {
            self.grid.dealias_cutoff()
        } else {
            self.grid.n() / 2
        };
        let start = (top as f64 * 0.9).ceil() as usize;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().take(top + 1) {
            let e = c.norm_sqr();
            total += e;
            if k >= start.max(1) {
                tail += e;
            }
        }
        (tail, total)
    }

    /// Complex Fourier coefficient `c_k` (k = 0..=n/2) with `f(x) = sum c_k e^{ikx}`.
    pub fn fourier_coefficients(&mut self, f: &[f64]) -> Vec<Complex64> {
        self.forward(f);
        let n = self.grid.n() as f64;
        // undo the -pi grid offset: x_j = -pi + j h
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                *c * (sign / n)
            })
            .collect()
    }
}
