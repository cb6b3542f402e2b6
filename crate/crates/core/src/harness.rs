//! Run configuration, pipelines and reports behind the `speclab` binary.
//!
//! A run is described by a [`RunConfig`]: a command, a parameter table, a
//! seed, a worker count and an output location. Configs come from a TOML file
//! ([`ConfigFile`]) with command-line overrides merged on top. Every run writes
//! `manifest.json`; `report.json` and CSV tables follow the output format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boxint::{self, AspectResult, ConcavityReport, DeltaBudget, PositivityReport};
use crate::error::{Error, Result};
use crate::heattrace::{
    self, b_coefficient, finite_part, log_grid, mixed_cell_expansion, mixed_cell_heat_trace, regulated_trace,
    sample_grid, volume_coefficient, HeatTraceSample,
};
use crate::mc;
use crate::plates::{self, CalibrationResult, CasimirMethod, PlateConfig, ThetaSource};
use crate::riesz::{self, MollifierShape};
use crate::spectrum::{enumerate, saturation_check, BoundaryCondition, BoxSpec};
use crate::stochastic::{self, NoiseChannel, SourceSpec};
use crate::verify::{self, Check, CriterionOutcome, VerifyOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_OUTPUT_DIR: &str = "speclab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Reduce,
    Spectrum,
    HeatTrace,
    FinitePart,
    Stochastic,
    Boxint,
    Plates,
    Calibrate,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Reduce => "reduce",
            Command::Spectrum => "spectrum",
            Command::HeatTrace => "heat-trace",
            Command::FinitePart => "finite-part",
            Command::Stochastic => "stochastic",
            Command::Boxint => "boxint",
            Command::Plates => "plates",
            Command::Calibrate => "calibrate",
            Command::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

/// Command parameters. Unset entries take per-command defaults on resolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// Plate separations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Cube side, or lateral period for plate boxes.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<NoiseChannel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<BoundaryCondition>,
    /// Mixed cell `[l1, l2, a]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<MollifierShape>,
}

impl Parameters {
    /// Fields from `other` win.
    pub fn merge(self, other: Parameters) -> Parameters {
        Parameters {
            tau: other.tau.or(self.tau),
            alpha: other.alpha.or(self.alpha),
            a: other.a.or(self.a),
            l: other.l.or(self.l),
            n_samples: other.n_samples.or(self.n_samples),
            cutoff: other.cutoff.or(self.cutoff),
            channels: other.channels.or(self.channels),
            channel: other.channel.or(self.channel),
            g: other.g.or(self.g),
            bc: other.bc.or(self.bc),
            cell: other.cell.or(self.cell),
            m: other.m.or(self.m),
            s: other.s.or(self.s),
            lambda: other.lambda.or(self.lambda),
            widths: other.widths.or(self.widths),
            mollifier: other.mollifier.or(self.mollifier),
        }
    }

    /// Fills every parameter the command reads with its default.
    pub fn resolved(mut self, command: Command) -> Parameters {
        match command {
            Command::Reduce => {
                let m = *self.m.get_or_insert(3);
                self.s.get_or_insert(riesz::critical_exponent(m));
                self.lambda.get_or_insert_with(|| vec![0.5, 1.0, 4.0]);
                self.widths.get_or_insert_with(|| vec![0.2, 0.1, 0.05]);
                self.mollifier.get_or_insert(MollifierShape::Gaussian);
            }
            Command::Spectrum => {
                if self.cell.is_none() {
                    self.l.get_or_insert(1.0);
                    self.bc.get_or_insert(BoundaryCondition::Dirichlet);
                }
                self.cutoff.get_or_insert(200.0);
                self.tau.get_or_insert_with(|| vec![0.5]);
            }
            Command::HeatTrace => {
                self.cell.get_or_insert([1.0, 1.0, 1.0]);
                self.tau.get_or_insert_with(|| log_grid(1e-3, 1.0, 16));
                self.cutoff.get_or_insert(400.0);
            }
            Command::FinitePart => {
                self.a.get_or_insert_with(|| vec![1.0]);
                self.channels.get_or_insert(1);
            }
            Command::Plates => {
                self.a.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
                self.channels.get_or_insert(1);
            }
            Command::Stochastic => {
                self.l.get_or_insert(1.0);
                self.cutoff.get_or_insert(200.0);
                self.tau.get_or_insert_with(|| vec![0.5]);
                self.n_samples.get_or_insert(100_000);
                self.channels.get_or_insert(1);
                self.channel.get_or_insert(NoiseChannel::Real);
                self.g.get_or_insert(stochastic::default_g());
            }
            Command::Boxint => {
                self.alpha.get_or_insert_with(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]);
                self.n_samples.get_or_insert(10_000_000);
            }
            Command::Calibrate => {
                self.alpha.get_or_insert_with(|| vec![0.5, 0.75, 1.0, 1.5, 2.0]);
                self.channels.get_or_insert(2);
            }
            Command::VerifyAll => {}
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")))
            }
        };
        let nonempty = |name: &str, v: &Vec<f64>| {
            if v.is_empty() {
                Err(Error::Config(format!("`{name}` must not be empty")))
            } else {
                Ok(())
            }
        };
        for (name, list) in [("tau", &self.tau), ("alpha", &self.alpha), ("a", &self.a), ("lambda", &self.lambda)] {
            if let Some(v) = list {
                nonempty(name, v)?;
                v.iter().try_for_each(|&x| positive(name, x))?;
            }
        }
        if let Some(w) = &self.widths {
            if w.len() < 2 {
                return Err(Error::Config("`widths` needs at least two entries".into()));
            }
            w.iter().try_for_each(|&x| positive("widths", x))?;
        }
        for (name, v) in [("L", self.l), ("cutoff", self.cutoff), ("g", self.g), ("s", self.s)] {
            if let Some(x) = v {
                positive(name, x)?;
            }
        }
        if let Some(c) = self.cell {
            c.iter().try_for_each(|&x| positive("cell", x))?;
        }
        if self.channels == Some(0) {
            return Err(Error::Config("`channels` must be at least 1".into()));
        }
        if let Some(m) = self.m {
            if m == 0 {
                return Err(Error::Config("`m` must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Fully resolved run description, echoed verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub parameters: Parameters,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        ConfigFile::default().resolve(Some(command)).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("`workers` must be at least 1".into()));
        }
        if self.command == Command::Stochastic && self.parameters.n_samples.is_some_and(|n| n < 2) {
            return Err(Error::Config("`n_samples` must be at least 2".into()));
        }
        self.parameters.validate()
    }
}

/// On-disk configuration; every field is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub parameters: Parameters,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields from `other` win.
    pub fn merge(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            command: other.command.or(self.command),
            seed: other.seed.or(self.seed),
            workers: other.workers.or(self.workers),
            output_dir: other.output_dir.or(self.output_dir),
            format: other.format.or(self.format),
            parameters: self.parameters.merge(other.parameters),
        }
    }

    /// Applies defaults and checks the schema. A command given both here and
    /// as `command` must agree.
    pub fn resolve(self, command: Option<Command>) -> Result<RunConfig> {
        let command = match (command, self.command) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("command `{}` conflicts with config `{}`", a.name(), b.name())))
            }
            (Some(c), _) | (None, Some(c)) => c,
            (None, None) => return Err(Error::Config("no command given".into())),
        };
        let config = RunConfig {
            command,
            parameters: self.parameters.resolved(command),
            seed: self.seed.unwrap_or(42),
            workers: self.workers.unwrap_or_else(mc::default_workers),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            format: self.format.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub units: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub name: String,
    pub detail: String,
}

/// One row of a regulated or heat trace table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub series: String,
    pub tau: f64,
    pub value: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: Manifest,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<AspectResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<CalibrationResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concavity: Option<ConcavityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positivity: Option<PositivityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<CriterionOutcome>>,
    /// Command-specific intermediate values.
    pub details: BTreeMap<String, Value>,
}

impl Report {
    fn new(config: &RunConfig) -> Self {
        Report {
            manifest: Manifest {
                tool: "speclab".into(),
                version: VERSION.into(),
                config: config.clone(),
                units: "hbar c = 1; energies carry a symbolic hbar c factor".into(),
                notes: Vec::new(),
            },
            passed: false,
            checks: Vec::new(),
            failures: Vec::new(),
            trace: None,
            delta: None,
            theta: None,
            concavity: None,
            positivity: None,
            criteria: None,
            details: BTreeMap::new(),
        }
    }

    fn detail(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.details.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    fn finish(mut self) -> Self {
        for c in self.checks.iter().filter(|c| !c.passed) {
            self.failures.push(Failure {
                name: c.name.clone(),
                detail: c.describe(),
            });
        }
        self.passed = self.failures.is_empty() && !self.checks.is_empty();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Pass,
    AssertionFailure,
    ConfigError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::AssertionFailure => 1,
            ExitStatus::ConfigError => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Executes the pipeline without writing anything. Module errors become
/// entries of the failure list.
pub fn execute(config: &RunConfig) -> Report {
    let mut report = Report::new(config);
    let result = match config.command {
        Command::Reduce => reduce(config, &mut report),
        Command::Spectrum => spectrum(config, &mut report),
        Command::HeatTrace => heat_trace(config, &mut report),
        Command::FinitePart => finite_part_cmd(config, &mut report),
        Command::Stochastic => stochastic_cmd(config, &mut report),
        Command::Boxint => boxint_cmd(config, &mut report),
        Command::Plates => plates_cmd(config, &mut report),
        Command::Calibrate => calibrate(config, &mut report),
        Command::VerifyAll => verify_all(config, &mut report),
    };
    if let Err(e) = result {
        report.failures.push(Failure { name: "error".into(), detail: e.to_string() });
    }
    report.finish()
}

/// Executes the pipeline and writes the manifest, report and tables.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let report = execute(config);
    let files = write_outputs(&report, &config.output_dir, config.format)?;
    let status = if report.passed { ExitStatus::Pass } else { ExitStatus::AssertionFailure };
    Ok(RunOutcome { status, report, files })
}

pub fn write_outputs(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let manifest = dir.join("manifest.json");
    fs::write(&manifest, serde_json::to_string_pretty(&report.manifest)? + "\n")?;
    files.push(manifest);
    if format.json() {
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
        files.push(path);
    }
    if format.csv() {
        files.extend(write_plot_data(report, dir)?);
        if let Some(rows) = &report.delta {
            let path = dir.join("delta.csv");
            boxint::write_delta_csv(fs::File::create(&path)?, rows)?;
            files.push(path);
        }
        if let Some(rows) = &report.theta {
            let path = dir.join("theta.csv");
            plates::write_theta_csv(fs::File::create(&path)?, rows)?;
            files.push(path);
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotTable {
    Trace,
    Delta,
    Theta,
    Concavity,
}

impl PlotTable {
    pub const ALL: [PlotTable; 4] = [PlotTable::Trace, PlotTable::Delta, PlotTable::Theta, PlotTable::Concavity];

    fn section(self) -> &'static str {
        match self {
            PlotTable::Trace => "trace",
            PlotTable::Delta => "delta",
            PlotTable::Theta => "theta",
            PlotTable::Concavity => "concavity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

/// Tidy `(x, y, series)` projection of one report section.
pub fn emit_plot_data(report: &Report, table: PlotTable) -> Result<Vec<PlotRow>> {
    let missing = || Error::MissingSection(table.section().into());
    let row = |x: f64, y: f64, series: &str| PlotRow { x, y, series: series.into() };
    Ok(match table {
        PlotTable::Trace => {
            report.trace.as_ref().ok_or_else(missing)?.iter().map(|r| row(r.tau, r.value, &r.series)).collect()
        }
        PlotTable::Delta => {
            let mut rows = Vec::new();
            for r in report.delta.as_ref().ok_or_else(missing)? {
                rows.push(row(r.alpha, r.delta_t_integral, "t_integral"));
                rows.push(row(r.alpha, r.delta_quadrature, "quadrature_3d"));
                if let Some(e) = &r.delta_mc {
                    rows.push(row(r.alpha, e.mean, "monte_carlo"));
                }
            }
            rows
        }
        PlotTable::Theta => {
            let mut rows = Vec::new();
            for r in report.theta.as_ref().ok_or_else(missing)? {
                let series = match r.source {
                    ThetaSource::ClosedForm => "closed_form",
                    ThetaSource::Pipeline => "pipeline",
                };
                rows.push(row(r.alpha, r.theta_bar, series));
            }
            rows
        }
        PlotTable::Concavity => {
            // largest second difference over u at each t
            let mut by_t: Vec<(f64, f64)> = Vec::new();
            for p in &report.concavity.as_ref().ok_or_else(missing)?.points {
                match by_t.iter_mut().find(|(t, _)| *t == p.t) {
                    Some((_, m)) => *m = m.max(p.second_difference),
                    None => by_t.push((p.t, p.second_difference)),
                }
            }
            by_t.into_iter().map(|(t, m)| row(t, m, "max_over_u")).collect()
        }
    })
}

/// Writes `plot_<table>.csv` for every section present in the report.
pub fn write_plot_data(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for table in PlotTable::ALL {
        let rows = match emit_plot_data(report, table) {
            Ok(rows) => rows,
            Err(Error::MissingSection(_)) => continue,
            Err(e) => return Err(e),
        };
        let path = dir.join(format!("plot_{}.csv", table.section()));
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        files.push(path);
    }
    Ok(files)
}

fn trace_rows(series: &str, samples: &[HeatTraceSample]) -> Vec<TraceRow> {
    samples
        .iter()
        .map(|s| TraceRow { series: series.into(), tau: s.tau, value: s.value, tail_bound: s.tail_bound })
        .collect()
}

fn reduce(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let (m, s) = (p.m.unwrap_or(3), p.s.unwrap_or(2.5));
    let lambdas = p.lambda.clone().unwrap_or_default();
    let constant = riesz::reduction_constant(m, s)?;
    let critical = riesz::critical_exponent(m);
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let closed = constant * lambda.powf(m as f64 / 2.0 - s);
        let momentum = riesz::momentum_integral(m, s, lambda)?;
        let schwinger = riesz::schwinger_integral(m, s, lambda)?;
        report.checks.push(Check::rel(format!("momentum integral, lambda={lambda}"), momentum, closed, 1e-8));
        report.checks.push(Check::rel(format!("proper-time integral, lambda={lambda}"), schwinger, closed, 1e-8));
        rows.push(json!({ "lambda": lambda, "closed_form": closed, "momentum": momentum, "proper_time": schwinger }));
    }
    if s == critical {
        let first = lambdas[0] * riesz::momentum_integral(m, s, lambdas[0])?;
        for &lambda in &lambdas[1..] {
            let v = lambda * riesz::momentum_integral(m, s, lambda)?;
            report.checks.push(Check::rel(format!("lambda*T constant at critical s, lambda={lambda}"), v, first, 1e-8));
        }
    }
    let widths = p.widths.clone().unwrap_or_default();
    let restriction =
        riesz::restriction_limit(m, s, lambdas[0], p.mollifier.unwrap_or(MollifierShape::Gaussian), &widths)?;
    if s == critical {
        report.note("at the critical exponent the smearing error carries a logarithm; restriction ratios are reported, not asserted");
    }
    let chain = riesz::two_step_chain(lambdas[0])?;
    report.checks.push(Check::rel("two-step chain, nested vs closed form", chain.nested * chain.lambda, chain.combined, 1e-7));
    report.checks.push(Check::rel("two-step chain, product vs direct", chain.combined, chain.combined_direct, 1e-12));
    report.detail("reduction_constant", constant)?;
    report.detail("critical_exponent", critical)?;
    report.detail("integrals", rows)?;
    report.detail("restriction", restriction)?;
    report.detail("two_step_chain", chain)?;
    Ok(())
}

fn spectrum(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let spec = match p.cell {
        Some([l1, l2, a]) => BoxSpec::mixed_cell(l1, l2, a)?,
        None => BoxSpec::cube(p.l.unwrap_or(1.0), p.bc.unwrap_or(BoundaryCondition::Dirichlet))?,
    };
    let stream = enumerate(&spec, p.cutoff.unwrap_or(200.0))?;
    let mut samples = Vec::new();
    for &tau in p.tau.as_deref().unwrap_or(&[]) {
        let tail = stream.tail_bound(tau)?;
        let value: f64 = stream.modes.iter().map(|m| 0.5 * m.multiplicity as f64 * m.value.sqrt() * (-tau * m.value).exp()).sum();
        report.checks.push(Check::holds(
            format!("tail bound below {:e} of trace at tau={tau}", heattrace::CUTOFF_RATIO),
            tail / value,
            tail <= heattrace::CUTOFF_RATIO * value,
        ));
        samples.push(HeatTraceSample { tau, value, tail_bound: tail });
    }
    if let Some([l1, l2, a]) = p.cell {
        report.detail("saturation", saturation_check(l1, l2, a)?)?;
    }
    report.detail("box", &spec)?;
    report.detail("mode_count", stream.mode_count())?;
    report.detail("distinct_levels", stream.modes.len())?;
    report.detail("lowest", stream.lowest())?;
    report.detail("leading_modes", stream.leading_modes(20)?.modes)?;
    report.trace = Some(trace_rows("regulated", &samples));
    Ok(())
}

fn heat_trace(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let [l1, l2, a] = p.cell.unwrap_or([1.0, 1.0, 1.0]);
    let taus = p.tau.clone().unwrap_or_default();
    let samples = sample_grid(&taus, |t| {
        Ok(HeatTraceSample { tau: t, value: mixed_cell_heat_trace(l1, l2, a, t)?, tail_bound: 0.0 })
    })?;
    let direct_taus: Vec<f64> = taus.iter().copied().filter(|&t| t >= 0.1).collect();
    if !direct_taus.is_empty() {
        let stream = enumerate(&BoxSpec::mixed_cell(l1, l2, a)?, p.cutoff.unwrap_or(400.0))?;
        for (t, s) in taus.iter().zip(&samples).filter(|(t, _)| **t >= 0.1) {
            let direct: f64 = stream.modes.iter().map(|m| m.multiplicity as f64 * (-t * m.value).exp()).sum();
            report.checks.push(Check::abs(format!("factorized vs spectral sum, t={t}"), s.value, direct, 1e-10));
        }
    }
    let fit = mixed_cell_expansion(l1, l2, a)?;
    let (v, b) = (volume_coefficient(l1, l2, a), b_coefficient(l1, l2, a)?);
    report.checks.push(Check::rel("fitted t^-3/2 coefficient", fit.volume, v, 1e-3));
    report.checks.push(Check::rel("fitted t^-1 coefficient", fit.boundary, b, 1e-2));
    report.detail("cell", [l1, l2, a])?;
    report.detail("volume_coefficient", v)?;
    report.detail("b_coefficient", b)?;
    report.detail("expansion_fit", fit)?;
    report.trace = Some(trace_rows(&format!("K({l1},{l2},{a})"), &samples));
    Ok(())
}

fn finite_part_cmd(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let channels = p.channels.unwrap_or(1);
    let spec = heattrace::FinitePartSpec { allow_unstable: true, ..plates::plate_fit_spec() };
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for &a in p.a.as_deref().unwrap_or(&[]) {
        let taus = p.tau.clone().unwrap_or_else(|| plates::default_tau_grid(a));
        let (series, samples) = match p.l {
            Some(period) => {
                let cfg = PlateConfig::finite_box(a, period)?;
                let area = cfg.area();
                let raw = sample_grid(&taus, |t| plates::finite_box_trace(&cfg, t))?;
                let per_area = raw
                    .iter()
                    .map(|s| HeatTraceSample { tau: s.tau, value: s.value / area, tail_bound: s.tail_bound / area })
                    .collect::<Vec<_>>();
                (format!("a={a},L={period}"), per_area)
            }
            None => (format!("a={a}"), sample_grid(&taus, |t| plates::per_area_trace(a, t))?),
        };
        let model = finite_part(&samples, &spec)?;
        let zeta = plates::zeta_route(a, channels)?;
        let fitted = channels as f64 * model.c0;
        report.checks.push(Check::holds(format!("nested-window stability, {series}"), model.nested_c0, model.stable));
        report.checks.push(Check::rel(format!("finite part vs zeta route, {series}"), fitted, zeta, plates::PIPELINE_TOL));
        rows.extend(trace_rows(&series, &samples));
        models.push(json!({ "series": series, "a": a, "finite_part": fitted, "zeta_route": zeta, "model": model }));
    }
    if p.l.is_some() {
        report.note("finite-box traces are divided by the lateral area before fitting");
    }
    report.detail("fit", &spec)?;
    report.detail("results", models)?;
    report.trace = Some(rows);
    Ok(())
}

fn plates_cmd(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let channels = p.channels.unwrap_or(1);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &a in p.a.as_deref().unwrap_or(&[]) {
        let taus = p.tau.clone().unwrap_or_else(|| plates::default_tau_grid(a));
        let (samples, model) = plates::plate_finite_part(a, &taus)?;
        let heat = channels as f64 * model.c0;
        let zeta = plates::casimir_per_area(a, CasimirMethod::ZetaRoute, channels)?;
        let exact = -(channels as f64) * PI * PI / (1440.0 * a.powi(3));
        report.checks.push(Check::rel(format!("heat fit vs zeta route, a={a}"), heat, zeta, plates::PIPELINE_TOL));
        report.checks.push(Check::rel(format!("zeta route vs -N pi^2/(1440 a^3), a={a}"), zeta, exact, 1e-14));
        rows.extend(trace_rows(&format!("a={a}"), &samples));
        results.push(json!({
            "a": a,
            "channels": channels,
            "heat_fit": heat,
            "zeta_route": zeta,
            "normalized_energy_n1": plates::normalized_energy(1, a, channels)?,
            "model": model,
        }));
    }
    report.detail("results", results)?;
    report.trace = Some(rows);
    Ok(())
}

fn stochastic_cmd(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let cube = BoxSpec::cube(p.l.unwrap_or(1.0), BoundaryCondition::Dirichlet)?;
    let stream = enumerate(&cube, p.cutoff.unwrap_or(200.0))?;
    let channel = p.channel.unwrap_or(NoiseChannel::Real);
    if channel == NoiseChannel::Complex {
        report.note("complex channel: noise normalized to E|xi|^2 = 1, an assumed convention");
    }
    let n = p.n_samples.unwrap_or(100_000);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &tau in p.tau.as_deref().unwrap_or(&[]) {
        let spec = SourceSpec::new(stream.clone(), tau)?
            .with_g(p.g.unwrap_or_else(stochastic::default_g))?
            .with_channel(channel)
            .with_channels(p.channels.unwrap_or(1))?;
        let trace = regulated_trace(&stream, tau)?;
        let expected = stochastic::expected_energy(&spec)?;
        let variance = stochastic::energy_variance(&spec)?;
        let e = stochastic::mc_estimate(&spec, n, config.seed, config.workers)?;
        report.checks.push(Check::sigma(format!("E[U] within 3 sigma, tau={tau}"), e.mean, expected, e.stderr, 3.0));
        report.checks.push(Check::rel(format!("Var(U) within 5%, tau={tau}"), e.variance, variance, 0.05));
        rows.push(TraceRow { series: "regulated".into(), tau, value: trace.value, tail_bound: trace.tail_bound });
        results.push(json!({ "tau": tau, "expected": expected, "variance": variance, "estimate": e }));
    }
    report.detail("mode_count", stream.mode_count())?;
    report.detail("results", results)?;
    report.trace = Some(rows);
    Ok(())
}

fn boxint_cmd(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let budget = DeltaBudget {
        mc_pairs: p.n_samples.unwrap_or(10_000_000),
        seed: config.seed,
        workers: config.workers,
        ..DeltaBudget::default()
    };
    let mut alphas = p.alpha.clone().unwrap_or_default();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let rows = alphas.iter().map(|&a| boxint::aspect_result(a, &budget, 1e-5)).collect::<Result<Vec<_>>>()?;
    for r in &rows {
        report.checks.push(Check::holds(format!("methods agree at alpha={}", r.alpha), r.method_spread, r.consistent));
        if let Some(q) = rows.iter().find(|q| (q.alpha * r.alpha - 1.0).abs() < 1e-12 && q.alpha > r.alpha) {
            report.checks.push(Check::abs(
                format!("Delta({}) = Delta({})", r.alpha, q.alpha),
                r.delta_t_integral,
                q.delta_t_integral,
                1e-8,
            ));
        }
    }
    for w in rows.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let toward_cube = if hi.alpha <= 1.0 {
            hi.delta_t_integral > lo.delta_t_integral
        } else if lo.alpha >= 1.0 {
            lo.delta_t_integral > hi.delta_t_integral
        } else {
            true
        };
        report.checks.push(Check::holds(
            format!("Delta increases toward alpha=1 between {} and {}", lo.alpha, hi.alpha),
            hi.delta_t_integral - lo.delta_t_integral,
            toward_cube,
        ));
    }
    let (tg, ug, h) = boxint::default_concavity_grids();
    let scan = boxint::log_concavity_scan(&tg, &ug, h)?;
    let chain = boxint::positivity_chain(&boxint::default_chain_grid(), 1e-6)?;
    report.checks.push(Check::holds("log-concavity margin negative", scan.margin, scan.passed));
    report.checks.push(Check::holds("positivity chain", chain.max_rel_err, chain.passed));
    report.detail("delta_cube_closed_form", boxint::delta_cube_closed_form())?;
    report.detail("budget", budget)?;
    report.delta = Some(rows);
    report.concavity = Some(scan);
    report.positivity = Some(chain);
    Ok(())
}

fn calibrate(config: &RunConfig, report: &mut Report) -> Result<()> {
    let p = &config.parameters;
    let channels = p.channels.unwrap_or(2);
    let alphas = p.alpha.clone().unwrap_or_default();
    let pairs = alphas
        .par_iter()
        .map(|&a| {
            Ok((
                plates::theta_bar(a, channels, ThetaSource::ClosedForm)?,
                plates::theta_bar(a, channels, ThetaSource::Pipeline)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (closed, pipeline) in pairs {
        report.checks.push(Check::rel(
            format!("pipeline vs closed form, alpha={}", closed.alpha),
            pipeline.theta_bar,
            closed.theta_bar,
            plates::PIPELINE_TOL,
        ));
        rows.push(closed);
        rows.push(pipeline);
    }
    let closed: Vec<&CalibrationResult> = rows.iter().filter(|r| r.source == ThetaSource::ClosedForm).collect();
    if let Some(min) = closed.iter().min_by(|a, b| a.theta_bar.total_cmp(&b.theta_bar)) {
        if alphas.contains(&1.0) {
            report.checks.push(Check::abs("argmin of theta_bar over alpha", min.alpha, 1.0, 0.0));
        }
        report.detail("argmin_alpha", min.alpha)?;
    }
    if channels == 2 {
        if let Some(r) = closed.iter().find(|r| r.alpha == 1.0) {
            report.checks.push(Check::abs("theta_bar(1, 2) decimal", r.theta_bar, 0.007_282_4, 5e-8));
        }
    }
    report.theta = Some(rows);
    Ok(())
}

fn verify_all(config: &RunConfig, report: &mut Report) -> Result<()> {
    let opts = VerifyOptions { seed: config.seed, workers: config.workers };
    let outcomes: Vec<CriterionOutcome> = verify::CRITERIA.par_iter().map(|&id| verify::run_criterion(id, &opts)).collect();
    for o in &outcomes {
        if o.checks.is_empty() {
            report.failures.push(Failure {
                name: format!("[{}] {}", o.id, o.title),
                detail: o.note.clone().unwrap_or_default(),
            });
        }
        for c in &o.checks {
            let mut c = c.clone();
            c.name = format!("[{}] {}", o.id, c.name);
            report.checks.push(c);
        }
    }
    report.criteria = Some(outcomes);
    Ok(())
}
