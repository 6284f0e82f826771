//! Spectral laboratory for one-dimensional degenerate parabolic systems
//! and the ODE reductions they satisfy at the symmetry point.

pub mod analyzer;
pub mod checker;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod model;
pub mod oracle;
pub mod scenario;

pub use analyzer::{fit_blowup, BlowupEstimate, FitConfig, FitWindow, Verdict};
pub use diagnostics::{energy_report, EnergyReport, PointTrace, TraceRow};
pub use error::{Error, Result};
pub use grid::{PeriodicGrid, Spectral};
pub use integrator::{HaltReason, Integrator, RunOutcome, StepControl};
pub use model::{classify_regime, ModelParams, RegimeCase, RegimeLabel, State};
pub use oracle::{closed_form, ClosedForm, ReducedState, SingularTime};
pub use scenario::{InitPreset, Scenario};
