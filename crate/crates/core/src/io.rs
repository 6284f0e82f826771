//! Run configuration and the on-disk formats: trace, diagnostics and snapshot
//! CSV files, each preceded by a `#` provenance block.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analyzer::{FitConfig, FitWindow};
use crate::diagnostics::{EnergyReport, PointTrace, TraceRow};
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::integrator::StepControl;
use crate::model::{ModelParams, RegimeLabel, State};
use crate::scenario::InitPreset;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Defaults to the case's exponents when `case` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub kappa0: f64,
    #[serde(default)]
    pub convective: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<RegimeLabel>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(default = "yes")]
    pub dealias: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 256, dealias: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: "run".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub rel_tol: f64,
    pub min_growth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_end: Option<f64>,
    /// `Omega^(2)` ceiling for the pointwise oracle comparison.
    pub compare_cap: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            rel_tol: d.rel_tol,
            min_growth: d.min_growth,
            window_start: None,
            window_end: None,
            compare_cap: 1e3,
        }
    }
}

impl AnalysisSection {
    pub fn fit_config(&self) -> FitConfig {
        let window = match (self.window_start, self.window_end) {
            (None, None) => FitWindow::LastDecade,
            (s, e) => FitWindow::Range {
                start: s.unwrap_or(f64::NEG_INFINITY),
                end: e.unwrap_or(f64::INFINITY),
            },
        };
        FitConfig {
            window,
            rel_tol: self.rel_tol,
            min_growth: self.min_growth,
            ..FitConfig::default()
        }
    }
}

/// Cartesian parameter lists; a missing list keeps the base config's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub init: InitPreset,
    #[serde(default)]
    pub step: StepControl,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Everything a run needs, checked.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub params: ModelParams,
    pub grid: PeriodicGrid,
    pub initial: State,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills exponents from `model.case` and validates every section.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let m = &self.model;
        let defaults = m.case.map(|c| c.default_exponents());
        let alpha = m.alpha.or(defaults.map(|d| d.0)).ok_or_else(|| missing("model.alpha"))?;
        let beta = m.beta.or(defaults.map(|d| d.1)).ok_or_else(|| missing("model.beta"))?;
        let convective = m.convective || m.case.is_some_and(|c| c.is_convective());
        let params = ModelParams::new(alpha, beta, m.kappa0, convective)?;
        if let Some(case) = m.case {
            case.validate_params(&params)?;
        }
        self.step.validate()?;
        let grid = PeriodicGrid::new(self.grid.n)?;
        let initial = self.init.build(&grid)?;
        Ok(ResolvedRun { params, grid, initial })
    }

    /// The config with exponents made explicit, as embedded in outputs.
    pub fn resolved_copy(&self, params: &ModelParams) -> RunConfig {
        let mut c = self.clone();
        c.model.alpha = Some(params.alpha());
        c.model.beta = Some(params.beta());
        c.model.convective = params.convective();
        c
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os("PARABLOW_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn missing(field: &str) -> Error {
    Error::Config(format!("missing field `{field}` (and no `model.case` to take it from)"))
}

/// `#`-prefixed lines carrying the tool version and the full resolved config.
pub fn provenance_header(config_toml: &str) -> String {
    let mut s = format!("# parablow {}\n", env!("CARGO_PKG_VERSION"));
    for line in config_toml.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

/// Round-trip exact float text (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>, provenance: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut buf = provenance.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| Error::Csv(format!("{}: {e}", path.display()));
        w.write_record(header.split(',')).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.into_iter().map(fmt_f64)).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &PointTrace, provenance: &str) -> Result<()> {
    write_table(path.as_ref(), TraceRow::HEADER, trace.rows.iter().map(|r| r.values().to_vec()), provenance)
}

pub const DIAGNOSTICS_HEADER: &str = "t,e0,e2,e_total,v_l2_sq,eta_l2_sq,l1_omega,mass_omega,dissipation_v,dissipation_omega,lyapunov_factor,min_omega,sym_odd,sym_even,spectral_tail,V1,Omega2,max_abs_vx,max_abs_omega_xx";

fn diagnostics_values(r: &EnergyReport) -> Vec<f64> {
    vec![
        r.t,
        r.e0,
        r.e2,
        r.e_total,
        r.v_l2_sq,
        r.eta_l2_sq,
        r.l1_omega,
        r.mass_omega,
        r.dissipation_v,
        r.dissipation_omega,
        r.lyapunov_factor,
        r.min_omega,
        r.sym_odd,
        r.sym_even,
        r.spectral_tail,
        r.v1,
        r.omega2,
        r.max_abs_vx,
        r.max_abs_omega_xx,
    ]
}

pub fn write_diagnostics_csv(path: impl AsRef<Path>, history: &[EnergyReport], provenance: &str) -> Result<()> {
    write_table(path.as_ref(), DIAGNOSTICS_HEADER, history.iter().map(diagnostics_values), provenance)
}

pub const SNAPSHOT_HEADER: &str = "t,x,v,omega";

pub fn write_snapshot(path: impl AsRef<Path>, grid: &PeriodicGrid, state: &State, provenance: &str) -> Result<()> {
    let rows = (0..grid.n()).map(|j| vec![state.time, grid.node(j), state.v[j], state.omega[j]]);
    write_table(path.as_ref(), SNAPSHOT_HEADER, rows, provenance)
}

/// Reads a headered CSV, skipping `#` lines, and checks the header against
/// `expected` column by column.
fn read_table(path: &Path, expected: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let want: Vec<&str> = expected.split(',').collect();
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != want {
        let missing: Vec<&str> = want.iter().filter(|c| !got.iter().any(|g| g == *c)).copied().collect();
        let extra: Vec<&str> = got.iter().filter(|c| !want.contains(&c.as_str())).map(String::as_str).collect();
        let detail = if missing.is_empty() && extra.is_empty() {
            "columns out of order".to_string()
        } else {
            format!("missing columns {missing:?}, unexpected columns {extra:?}")
        };
        return Err(Error::Csv(format!("{}: bad header: {detail}; expected `{expected}`", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(want.len());
        for (c, name) in rec.iter().zip(&want) {
            let x = c.parse::<f64>().map_err(|_| {
                Error::Csv(format!("{}:{line}: column `{name}`: cannot parse `{c}`", path.display()))
            })?;
            row.push(x);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<PointTrace> {
    let rows = read_table(path.as_ref(), TraceRow::HEADER)?;
    let mut trace = PointTrace::default();
    for r in rows {
        let arr: [f64; 18] = r.try_into().expect("width checked");
        trace.push(TraceRow::from_values(&arr));
    }
    Ok(trace)
}

/// Reads a snapshot and checks it against `grid` (sample count and node positions).
pub fn read_snapshot(path: impl AsRef<Path>, grid: &PeriodicGrid) -> Result<State> {
    let path = path.as_ref();
    let rows = read_table(path, SNAPSHOT_HEADER)?;
    if rows.len() != grid.n() {
        return Err(Error::LengthMismatch {
            field: "snapshot",
            expected: grid.n(),
            got: rows.len(),
        });
    }
    let t = rows[0][0];
    for (j, r) in rows.iter().enumerate() {
        if r[0] != t {
            return Err(Error::Csv(format!("{}: column `t` is not constant", path.display())));
        }
        if (r[1] - grid.node(j)).abs() > 1e-12 {
            return Err(Error::Csv(format!(
                "{}: column `x` row {j} is {} but the grid node is {}",
                path.display(),
                r[1],
                grid.node(j)
            )));
        }
    }
    let v = rows.iter().map(|r| r[2]).collect();
    let omega = rows.iter().map(|r| r[3]).collect();
    State::new(grid, t, v, omega)
}

/// Grid size recorded in a snapshot (its row count).
pub fn snapshot_len(path: impl AsRef<Path>) -> Result<usize> {
    Ok(read_table(path.as_ref(), SNAPSHOT_HEADER)?.len())
}
