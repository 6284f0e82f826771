//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analyzer::{compare_with_oracle, fit_blowup, oracle_series, BlowupEstimate, ComparisonReport, FitConfig, FitWindow, Verdict};
use crate::checker::{
    check_expansion, check_interpolation, check_sigma_constraints, sigma_constraint_scan, ExpansionCase, ExpansionParams,
    Interpolation, TestFunctionSampler,
};
use crate::diagnostics::{conservation_residual, energy_inequality_check, EnergyReport};
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, Spectral};
use crate::integrator::{HaltReason, Integrator, RunOutcome};
use crate::io::{self, RunConfig};
use crate::model::{classify_regime, ModelParams, RegimeCase, RegimeLabel, State};
use crate::oracle::{closed_form, integrate_reduced_at, OdeOptions, ReducedState, SingularTime};

#[derive(Debug, Parser)]
#[command(name = "parablow", version, about = "Degenerate parabolic blow-up laboratory")]
pub struct Cli {
    /// Output directory (overrides the config and PARABLOW_OUT_DIR).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation from a config file.
    Run { config: PathBuf },
    /// Run the cartesian product of the config's [sweep] lists.
    Sweep { config: PathBuf },
    /// Evaluate the reduced system at the symmetry point.
    Oracle(OracleArgs),
    /// Verify derivative expansions, interpolation inequalities or the sigma constraints.
    CheckIdentities(CheckArgs),
    /// Fit the singular time of a trace CSV.
    Fit(FitArgs),
    /// Continue a run from a snapshot CSV.
    SnapshotResume {
        snapshot: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Theorem case, e.g. NC-Case3.
    #[arg(long)]
    pub case: RegimeLabel,
    #[arg(long, allow_hyphen_values = true)]
    pub v1: f64,
    #[arg(long)]
    pub omega2: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa0: f64,
    /// Print the full result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Expansion name (F, G, OMEGA_XX, V_X, SIGMA, SIGMA_DDV) or `all`.
    #[arg(long, default_value = "all")]
    pub case: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa0: f64,
    #[arg(long, default_value_t = 2)]
    pub sigma_n: u32,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Check an interpolation inequality instead: H2, L4 or LINF.
    #[arg(long)]
    pub interp: Option<String>,
    /// Exponent for LINF.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Evaluate the sigma constraints at (sigma-n, alpha, beta, m) and scan n = 2..=6.
    #[arg(long)]
    pub sigma: bool,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub trace: PathBuf,
    #[arg(long)]
    pub window_start: Option<f64>,
    #[arg(long)]
    pub window_end: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 10.0)]
    pub min_growth: f64,
    /// Reference singular time.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Treat `--t0` as an upper bound rather than the exact value.
    #[arg(long)]
    pub at_most: bool,
    /// Also write the estimate to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses the process arguments and runs; errors print to stderr and exit 2.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<u8> {
    let out = cli.out_dir.as_deref();
    match &cli.command {
        Command::Run { config } => cmd_run(config, out),
        Command::Sweep { config } => cmd_sweep(config, out),
        Command::Oracle(a) => cmd_oracle(a),
        Command::CheckIdentities(a) => cmd_check_identities(a),
        Command::Fit(a) => cmd_fit(a),
        Command::SnapshotResume { snapshot, config } => cmd_snapshot_resume(snapshot, config, out),
    }
}

fn print_json(v: &impl Serialize) {
    let s = serde_json::to_string_pretty(v).expect("json");
    let mut o = std::io::stdout().lock();
    let _ = writeln!(o, "{s}");
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(v).expect("json") + "\n";
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Outcome of a run plus everything derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub regime: RegimeCase,
    pub halt_reason: HaltReason,
    pub steps: usize,
    pub final_time: f64,
    pub initial_energies: Option<EnergyReport>,
    pub final_energies: Option<EnergyReport>,
    pub conservation_drift: Option<f64>,
    pub energy_inequality_holds: bool,
    pub singular_time: Option<SingularTime>,
    pub comparison: Option<ComparisonReport>,
    pub analysis: Option<Analysis>,
    pub analysis_note: Option<String>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub case: String,
    pub t0_hat: f64,
    pub exponent_hat: f64,
    pub residual: f64,
    pub verdict: Verdict,
    pub fit_window: (f64, f64),
    pub tolerances: Value,
}

fn shift(st: SingularTime, t: f64) -> SingularTime {
    match st {
        SingularTime::Exact(x) => SingularTime::Exact(x + t),
        SingularTime::AtMost(x) => SingularTime::AtMost(x + t),
        SingularTime::None => SingularTime::None,
    }
}

/// Classifies, integrates and adjudicates one run.
pub fn execute_run(
    cfg: &RunConfig,
    params: &ModelParams,
    grid: PeriodicGrid,
    initial: State,
) -> Result<(RunOutcome, RunSummary)> {
    let mut calc = Spectral::new(grid);
    let regime = classify_regime(params, &initial, &mut calc);
    let t_init = initial.time;
    let v1 = calc.trace_at_zero(&initial.v, 1);
    let omega2 = calc.trace_at_zero(&initial.omega, 2);
    let omega0 = calc.trace_at_zero(&initial.omega, 0);

    let mut integ = Integrator::new(*params, cfg.step, grid, cfg.grid.dealias)?;
    let outcome = integ.run(initial, &mut []);

    let symmetric = regime.label.is_some() && omega0.abs() < 1e-12;
    let singular_time = if symmetric {
        closed_form(params, &ReducedState::new(t_init, v1, omega2))
            .ok()
            .map(|cf| shift(cf.singular_time, t_init))
    } else {
        None
    };
    let comparison = if symmetric {
        oracle_series(params, &outcome.trace, 1e-10)
            .ok()
            .map(|o| compare_with_oracle(params, &outcome.trace, &o, cfg.analysis.compare_cap))
    } else {
        None
    };

    let tol = &cfg.analysis;
    let fit_cfg = FitConfig {
        reference: singular_time.unwrap_or(SingularTime::None),
        ..tol.fit_config()
    };
    let (analysis, analysis_note) = match fit_blowup(&outcome.trace, &fit_cfg) {
        Ok(est) => (Some(analysis_of(&regime, &est, &fit_cfg)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut verdict = analysis.as_ref().map(|a| a.verdict);
    // no singularity by t_end although one is due before it
    if outcome.halt_reason == HaltReason::ReachedTEnd {
        if let Some(t0) = fit_cfg.reference.time() {
            if outcome.final_state.time > t0 * (1.0 + tol.rel_tol) {
                verdict = Some(Verdict::Violation);
            }
        }
    }

    let conservation_drift = conservation_residual(params, &outcome.diagnostics).ok();
    let ineq = energy_inequality_check(params, &outcome.diagnostics, 1e-8);
    let summary = RunSummary {
        regime,
        halt_reason: outcome.halt_reason,
        steps: outcome.steps,
        final_time: outcome.final_state.time,
        initial_energies: outcome.diagnostics.first().copied(),
        final_energies: outcome.diagnostics.last().copied(),
        conservation_drift,
        energy_inequality_holds: ineq.holds(),
        singular_time,
        comparison,
        analysis,
        analysis_note,
        verdict,
    };
    Ok((outcome, summary))
}

fn analysis_of(regime: &RegimeCase, est: &BlowupEstimate, cfg: &FitConfig) -> Analysis {
    let window = match cfg.window {
        FitWindow::LastDecade => json!("last_decade"),
        FitWindow::Range { start, end } => json!([start, end]),
    };
    Analysis {
        case: regime.label_str().to_string(),
        t0_hat: est.t0_hat,
        exponent_hat: est.exponent_hat,
        residual: est.residual,
        verdict: est.verdict,
        fit_window: est.fit_window,
        tolerances: json!({ "rel_tol": cfg.rel_tol, "min_growth": cfg.min_growth, "window": window }),
    }
}

fn exit_code(summary: &RunSummary) -> u8 {
    match summary.halt_reason {
        HaltReason::NonFinite | HaltReason::StepUnderflow => 1,
        _ if summary.verdict == Some(Verdict::Violation) => 1,
        _ => 0,
    }
}

fn persist_run(
    cfg: &RunConfig,
    params: &ModelParams,
    grid: &PeriodicGrid,
    dir: &Path,
    prefix: &str,
    outcome: &RunOutcome,
    summary: &RunSummary,
) -> Result<()> {
    let resolved = cfg.resolved_copy(params);
    let prov = io::provenance_header(&resolved.to_toml());
    io::write_trace_csv(dir.join(format!("{prefix}_trace.csv")), &outcome.trace, &prov)?;
    io::write_diagnostics_csv(dir.join(format!("{prefix}_diagnostics.csv")), &outcome.diagnostics, &prov)?;
    io::write_snapshot(dir.join(format!("{prefix}_final.csv")), grid, &outcome.final_state, &prov)?;
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolved,
        "summary": summary,
    });
    write_json(&dir.join(format!("{prefix}_summary.json")), &doc)
}

fn report_run(summary: &RunSummary, dir: &Path, prefix: &str) {
    println!(
        "regime {}  halt {}  t = {}  verdict {}",
        summary.regime.label_str(),
        summary.halt_reason,
        summary.final_time,
        summary.verdict.map_or("-", |v| v.as_str())
    );
    if let Some(a) = &summary.analysis {
        println!("t0_hat = {}  exponent_hat = {}", a.t0_hat, a.exponent_hat);
    }
    println!("wrote {}/{prefix}_{{trace,diagnostics,final}}.csv and {prefix}_summary.json", dir.display());
}

pub fn cmd_run(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = RunConfig::load(config)?;
    let r = cfg.resolve()?;
    let (outcome, summary) = execute_run(&cfg, &r.params, r.grid, r.initial)?;
    let dir = cfg.output_dir(out);
    persist_run(&cfg, &r.params, &r.grid, &dir, &cfg.output.prefix, &outcome, &summary)?;
    report_run(&summary, &dir, &cfg.output.prefix);
    Ok(exit_code(&summary))
}

pub fn cmd_snapshot_resume(snapshot: &Path, config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = RunConfig::load(config)?;
    let r = cfg.resolve()?;
    let initial = io::read_snapshot(snapshot, &r.grid)?;
    let (outcome, summary) = execute_run(&cfg, &r.params, r.grid, initial)?;
    let dir = cfg.output_dir(out);
    let prefix = format!("{}_resumed", cfg.output.prefix);
    persist_run(&cfg, &r.params, &r.grid, &dir, &prefix, &outcome, &summary)?;
    report_run(&summary, &dir, &prefix);
    Ok(exit_code(&summary))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    alpha: f64,
    beta: f64,
    kappa0: f64,
    a: f64,
    b: f64,
    regime: String,
    halt: String,
    t0_hat: Option<f64>,
    verdict: String,
    error: Option<String>,
}

impl SweepRow {
    fn failed(&self) -> bool {
        self.error.is_some() || self.verdict == "Violation"
    }
}

fn list(name: &str, l: &Option<Vec<f64>>, base: f64) -> Result<Vec<f64>> {
    match l {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("sweep list `sweep.{name}` is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

fn sweep_one(base: &RunConfig, alpha: f64, beta: f64, kappa0: f64, a: f64, b: f64) -> SweepRow {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.model.case = None;
    cfg.model.alpha = Some(alpha);
    cfg.model.beta = Some(beta);
    cfg.model.kappa0 = kappa0;
    cfg.init.a = a;
    cfg.init.b = b;
    let mut row = SweepRow {
        alpha,
        beta,
        kappa0,
        a,
        b,
        regime: "none".into(),
        halt: "-".into(),
        t0_hat: None,
        verdict: "-".into(),
        error: None,
    };
    let res = cfg.resolve().and_then(|r| execute_run(&cfg, &r.params, r.grid, r.initial));
    match res {
        Ok((_, s)) => {
            row.regime = s.regime.label_str().into();
            row.halt = s.halt_reason.to_string();
            row.t0_hat = s.analysis.as_ref().map(|a| a.t0_hat);
            row.verdict = match (s.regime.label, s.verdict) {
                (None, _) => "no theorem applies".into(),
                (Some(_), Some(v)) => v.to_string(),
                (Some(_), None) => "-".into(),
            };
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn cmd_sweep(config: &Path, out: Option<&Path>) -> Result<u8> {
    let cfg = RunConfig::load(config)?;
    let sw = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let m = &cfg.model;
    let defaults = m.case.map(|c| c.default_exponents());
    let alpha0 = m.alpha.or(defaults.map(|d| d.0)).unwrap_or(1.0);
    let beta0 = m.beta.or(defaults.map(|d| d.1)).unwrap_or(1.0);
    let alphas = list("alpha", &sw.alpha, alpha0)?;
    let betas = list("beta", &sw.beta, beta0)?;
    let kappas = list("kappa0", &sw.kappa0, m.kappa0)?;
    let aa = list("a", &sw.a, cfg.init.a)?;
    let bb = list("b", &sw.b, cfg.init.b)?;

    let mut combos = Vec::new();
    for &al in &alphas {
        for &be in &betas {
            for &k in &kappas {
                for &a in &aa {
                    for &b in &bb {
                        combos.push((al, be, k, a, b));
                    }
                }
            }
        }
    }
    let rows: Vec<SweepRow> = combos
        .par_iter()
        .map(|&(al, be, k, a, b)| sweep_one(&cfg, al, be, k, a, b))
        .collect();

    let mut body = io::provenance_header(&cfg.to_toml());
    body.push_str("alpha,beta,kappa0,a,b,regime,halt,t0_hat,verdict,error\n");
    for r in &rows {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            io::fmt_f64(r.alpha),
            io::fmt_f64(r.beta),
            io::fmt_f64(r.kappa0),
            io::fmt_f64(r.a),
            io::fmt_f64(r.b),
            r.regime,
            r.halt,
            r.t0_hat.map_or(String::new(), io::fmt_f64),
            r.verdict,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    let dir = cfg.output_dir(out);
    let path = dir.join(format!("{}_sweep.csv", cfg.output.prefix));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    for r in &rows {
        println!(
            "alpha={} beta={} a={} b={}: {} / {} / {}",
            r.alpha, r.beta, r.a, r.b, r.regime, r.halt, r.verdict
        );
    }
    println!("wrote {}", path.display());
    Ok(if rows.iter().any(SweepRow::failed) { 1 } else { 0 })
}

/// Shortest decimal text with at most 12 significant digits.
fn short(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{:.11e}", x);
    s.parse::<f64>().map_or(s, |y| y.to_string())
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<u8> {
    let (da, db) = a.case.default_exponents();
    let params = ModelParams::new(
        a.alpha.unwrap_or(da),
        a.beta.unwrap_or(db),
        a.kappa0,
        a.case.is_convective(),
    )?;
    a.case.validate_params(&params)?;
    let ini = ReducedState::new(0.0, a.v1, a.omega2);
    let (source, v1, omega2, singular) = match closed_form(&params, &ini) {
        Ok(cf) if cf.is_exact() => {
            let (v, w) = cf.evaluate(a.t);
            ("closed form", v, w, cf.singular_time)
        }
        other => {
            let st = other.map(|cf| cf.singular_time).unwrap_or(SingularTime::None);
            let s = integrate_reduced_at(&params, &ini, &[a.t], &OdeOptions::default())?;
            let p = s.points.last().copied().unwrap_or(ini);
            if p.t < a.t {
                ("numerical", f64::NAN, f64::INFINITY, st)
            } else {
                ("numerical", p.v1, p.omega2, st)
            }
        }
    };
    if a.json {
        print_json(&json!({
            "case": a.case, "alpha": params.alpha(), "beta": params.beta(), "kappa0": params.kappa0(),
            "t": a.t, "v1": v1, "omega2": omega2, "singular_time": singular, "source": source,
        }));
    } else {
        println!("case {} ({source})", a.case);
        println!("V1 = {}", short(v1));
        println!("Omega2 = {}", short(omega2));
        match singular {
            SingularTime::Exact(t) => println!("singular time = {}", short(t)),
            SingularTime::AtMost(t) => println!("singular time <= {}", short(t)),
            SingularTime::None => println!("singular time: none predicted"),
        }
    }
    Ok(0)
}

pub fn cmd_check_identities(a: &CheckArgs) -> Result<u8> {
    let sampler = TestFunctionSampler {
        seed: a.seed,
        max_degree: a.degree,
        ..TestFunctionSampler::default()
    };
    if a.sigma {
        let rep = check_sigma_constraints(a.sigma_n, a.alpha, a.beta, a.m)?;
        let scan = sigma_constraint_scan(2..=6, a.m, 60, 4.0)?;
        print_json(&json!({ "constraints": rep, "scan": scan }));
        return Ok(0);
    }
    if let Some(name) = &a.interp {
        let ineq = match name.parse::<Interpolation>()? {
            Interpolation::LinfInterp { .. } => Interpolation::LinfInterp { p: a.p },
            i => i,
        };
        let rep = check_interpolation(ineq, &sampler, a.trials, a.n, None)?;
        print_json(&rep);
        return Ok(if rep.violations == 0 { 0 } else { 1 });
    }
    let params = ExpansionParams::new(a.alpha, a.beta, a.kappa0, a.sigma_n)?;
    let cases: Vec<ExpansionCase> = if a.case.eq_ignore_ascii_case("all") {
        ExpansionCase::ALL.to_vec()
    } else {
        vec![a.case.parse()?]
    };
    let reports = cases
        .into_iter()
        .map(|c| check_expansion(c, &params, &sampler, a.trials, a.n))
        .collect::<Result<Vec<_>>>()?;
    let ok = reports.iter().all(|r| r.max_residual < a.tol);
    print_json(&json!({ "tolerance": a.tol, "passed": ok, "reports": reports }));
    Ok(if ok { 0 } else { 1 })
}

pub fn cmd_fit(a: &FitArgs) -> Result<u8> {
    let trace = io::read_trace_csv(&a.trace)?;
    let window = match (a.window_start, a.window_end) {
        (None, None) => FitWindow::LastDecade,
        (s, e) => FitWindow::Range {
            start: s.unwrap_or(f64::NEG_INFINITY),
            end: e.unwrap_or(f64::INFINITY),
        },
    };
    let reference = match (a.t0, a.at_most) {
        (Some(t), false) => SingularTime::Exact(t),
        (Some(t), true) => SingularTime::AtMost(t),
        (None, _) => SingularTime::None,
    };
    let cfg = FitConfig {
        window,
        rel_tol: a.rel_tol,
        min_growth: a.min_growth,
        reference,
    };
    let est = fit_blowup(&trace, &cfg)?;
    if let Some(p) = &a.output {
        write_json(p, &est)?;
    }
    print_json(&est);
    Ok(if est.verdict == Verdict::Violation { 1 } else { 0 })
}
