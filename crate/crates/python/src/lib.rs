//! Python bindings. Structured results come back as plain dicts and lists;
//! enumerations are passed as their lowercase names.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ::speclab::boxint::{self, DeltaBudget, DeltaMethod};
use ::speclab::harness::{self, Command, ConfigFile, OutputFormat, Parameters};
use ::speclab::heattrace::{self, FinitePartSpec, HeatTraceSample};
use ::speclab::plates::{self, CasimirMethod, ThetaSource};
use ::speclab::riesz::{self, MollifierShape, MollifierSpec};
use ::speclab::specfun::{self, ThetaKind, ThetaMode};
use ::speclab::spectrum::{self, AxisSpec, BoundaryCondition, EigenStream};
use ::speclab::stochastic::{self, NoiseChannel, SourceSpec};
use ::speclab::verify::{self, VerifyOptions};

create_exception!(speclab, SpeclabError, PyException);

fn err(e: ::speclab::Error) -> PyErr {
    SpeclabError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SpeclabError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| SpeclabError::new_err(e.to_string()))
}

fn parse<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| SpeclabError::new_err(format!("unknown {what} `{name}`")))
}

fn workers(w: Option<usize>) -> usize {
    w.unwrap_or_else(::speclab::mc::default_workers)
}

#[pyfunction]
fn gamma(x: f64) -> PyResult<f64> {
    specfun::gamma(x).map_err(err)
}

#[pyfunction]
fn erf(x: f64) -> f64 {
    specfun::erf(x)
}

#[pyfunction]
fn erfc(x: f64) -> f64 {
    specfun::erfc(x)
}

/// Heat sum of one interval; `kind` is "dirichlet" or "neumann".
#[pyfunction]
#[pyo3(signature = (kind, length, t, mode = "auto"))]
fn theta(kind: &str, length: f64, t: f64, mode: &str) -> PyResult<f64> {
    let kind: ThetaKind = parse("theta kind", kind)?;
    let mode: ThetaMode = parse("theta mode", mode)?;
    specfun::theta(kind, length, t, mode).map_err(err)
}

/// `zeta(-n)` for odd `n` as `(numerator, denominator)`.
#[pyfunction]
fn zeta_negative_odd(n: u32) -> PyResult<(i64, i64)> {
    let z = specfun::zeta_negative_odd(n).map_err(err)?;
    Ok((*z.numer(), *z.denom()))
}

#[pyfunction]
fn reduction_constant(m: u32, s: f64) -> PyResult<f64> {
    riesz::reduction_constant(m, s).map_err(err)
}

#[pyfunction]
fn critical_exponent(m: u32) -> f64 {
    riesz::critical_exponent(m)
}

#[pyfunction]
fn momentum_integral(m: u32, s: f64, lam: f64) -> PyResult<f64> {
    riesz::momentum_integral(m, s, lam).map_err(err)
}

#[pyfunction]
fn schwinger_integral(m: u32, s: f64, lam: f64) -> PyResult<f64> {
    riesz::schwinger_integral(m, s, lam).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (m, s, lam, width, shape = "gaussian"))]
fn mollified_reduction(m: u32, s: f64, lam: f64, width: f64, shape: &str) -> PyResult<f64> {
    let spec = match parse::<MollifierShape>("mollifier", shape)? {
        MollifierShape::Gaussian => MollifierSpec::gaussian(width),
        MollifierShape::Ball => MollifierSpec::ball(width),
    };
    riesz::mollified_reduction(m, s, lam, &spec).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (m, s, lam, widths, shape = "gaussian"))]
fn restriction_limit(py: Python<'_>, m: u32, s: f64, lam: f64, widths: Vec<f64>, shape: &str) -> PyResult<Py<PyAny>> {
    let r = riesz::restriction_limit(m, s, lam, parse("mollifier", shape)?, &widths).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn two_step_chain(py: Python<'_>, lam: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &riesz::two_step_chain(lam).map_err(err)?)
}

/// Product of intervals with at least one Dirichlet axis.
#[pyclass(name = "BoxSpec", frozen)]
struct PyBoxSpec {
    inner: spectrum::BoxSpec,
}

#[pymethods]
impl PyBoxSpec {
    /// `axes` is a list of `(length, bc)` pairs.
    #[new]
    fn new(axes: Vec<(f64, String)>) -> PyResult<Self> {
        let axes = axes
            .into_iter()
            .map(|(l, bc)| AxisSpec::new(l, parse::<BoundaryCondition>("boundary condition", &bc)?).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: spectrum::BoxSpec::new(axes).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (side, bc = "dirichlet"))]
    fn cube(side: f64, bc: &str) -> PyResult<Self> {
        Ok(Self { inner: spectrum::BoxSpec::cube(side, parse("boundary condition", bc)?).map_err(err)? })
    }

    #[staticmethod]
    fn plate(period: f64, a: f64) -> PyResult<Self> {
        Ok(Self { inner: spectrum::BoxSpec::plate(period, a).map_err(err)? })
    }

    #[staticmethod]
    fn mixed_cell(l1: f64, l2: f64, a: f64) -> PyResult<Self> {
        Ok(Self { inner: spectrum::BoxSpec::mixed_cell(l1, l2, a).map_err(err)? })
    }

    fn lowest_eigenvalue(&self) -> f64 {
        self.inner.lowest_eigenvalue()
    }

    fn heat_trace(&self, t: f64) -> PyResult<f64> {
        self.inner.heat_trace(t).map_err(err)
    }

    fn tail_bound(&self, cutoff: f64, t: f64) -> PyResult<f64> {
        self.inner.tail_bound(cutoff, t).map_err(err)
    }

    fn enumerate(&self, cutoff: f64) -> PyResult<PyEigenStream> {
        Ok(PyEigenStream { inner: spectrum::enumerate(&self.inner, cutoff).map_err(err)? })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("BoxSpec({:?})", self.inner.axes.iter().map(|a| (a.length, a.bc)).collect::<Vec<_>>())
    }
}

/// Eigenvalues below a cutoff with multiplicities and a certified tail.
#[pyclass(name = "EigenStream", frozen)]
struct PyEigenStream {
    inner: EigenStream,
}

#[pymethods]
impl PyEigenStream {
    /// Explicit finite spectrum; the tail is zero.
    #[staticmethod]
    fn from_values(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: EigenStream::from_values(&values).map_err(err)? })
    }

    #[getter]
    fn cutoff(&self) -> f64 {
        self.inner.cutoff
    }

    #[getter]
    fn modes(&self) -> Vec<(f64, u64)> {
        self.inner.modes.iter().map(|m| (m.value, m.multiplicity)).collect()
    }

    fn mode_count(&self) -> u64 {
        self.inner.mode_count()
    }

    fn lowest(&self) -> f64 {
        self.inner.lowest()
    }

    /// Every eigenvalue with multiplicity, ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().collect()
    }

    fn tail_bound(&self, t: f64) -> PyResult<f64> {
        self.inner.tail_bound(t).map_err(err)
    }

    /// `(value, tail_bound)` of `(1/2) sum lambda^{1/2} exp(-tau lambda)`.
    fn regulated_trace(&self, tau: f64) -> PyResult<(f64, f64)> {
        let s = heattrace::regulated_trace(&self.inner, tau).map_err(err)?;
        Ok((s.value, s.tail_bound))
    }

    fn __len__(&self) -> usize {
        self.inner.modes.len()
    }

    fn __repr__(&self) -> String {
        format!("EigenStream(cutoff={}, levels={}, modes={})", self.inner.cutoff, self.inner.modes.len(), self.inner.mode_count())
    }
}

#[pyfunction]
fn lateral_gap(l1: f64, l2: f64) -> f64 {
    spectrum::lateral_gap(l1, l2)
}

#[pyfunction]
fn saturation_check(py: Python<'_>, l1: f64, l2: f64, a: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &spectrum::saturation_check(l1, l2, a).map_err(err)?)
}

#[pyfunction]
fn mixed_cell_heat_trace(l1: f64, l2: f64, a: f64, t: f64) -> PyResult<f64> {
    heattrace::mixed_cell_heat_trace(l1, l2, a, t).map_err(err)
}

#[pyfunction]
fn b_coefficient(l1: f64, l2: f64, a: f64) -> PyResult<f64> {
    heattrace::b_coefficient(l1, l2, a).map_err(err)
}

#[pyfunction]
fn volume_coefficient(l1: f64, l2: f64, a: f64) -> f64 {
    heattrace::volume_coefficient(l1, l2, a)
}

#[pyfunction]
fn mixed_cell_expansion(py: Python<'_>, l1: f64, l2: f64, a: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &heattrace::mixed_cell_expansion(l1, l2, a).map_err(err)?)
}

/// Weighted least-squares finite part. `spec` takes the fields of the fit
/// prescription (`exponents`, `positive_powers`, `include_log`, ...).
#[pyfunction]
#[pyo3(signature = (taus, values, spec, tail_bounds = None))]
fn finite_part(
    py: Python<'_>,
    taus: Vec<f64>,
    values: Vec<f64>,
    spec: &Bound<'_, PyAny>,
    tail_bounds: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    if taus.len() != values.len() {
        return Err(SpeclabError::new_err("taus and values differ in length"));
    }
    let tails = tail_bounds.unwrap_or_else(|| vec![0.0; taus.len()]);
    let samples: Vec<HeatTraceSample> = taus
        .iter()
        .zip(&values)
        .zip(&tails)
        .map(|((&tau, &value), &tail_bound)| HeatTraceSample { tau, value, tail_bound })
        .collect();
    let spec: FinitePartSpec = from_py(py, spec)?;
    to_py(py, &heattrace::finite_part(&samples, &spec).map_err(err)?)
}

fn source(
    stream: &PyEigenStream,
    tau: f64,
    g: Option<f64>,
    channel: &str,
    channels: usize,
) -> PyResult<SourceSpec> {
    let mut spec = SourceSpec::new(stream.inner.clone(), tau).map_err(err)?;
    if let Some(g) = g {
        spec = spec.with_g(g).map_err(err)?;
    }
    spec.with_channel(parse::<NoiseChannel>("noise channel", channel)?).with_channels(channels).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (stream, tau, g = None, channel = "real", channels = 1))]
fn expected_energy(stream: &PyEigenStream, tau: f64, g: Option<f64>, channel: &str, channels: usize) -> PyResult<f64> {
    stochastic::expected_energy(&source(stream, tau, g, channel, channels)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (stream, tau, g = None, channel = "real", channels = 1))]
fn energy_variance(stream: &PyEigenStream, tau: f64, g: Option<f64>, channel: &str, channels: usize) -> PyResult<f64> {
    stochastic::energy_variance(&source(stream, tau, g, channel, channels)?).map_err(err)
}

/// Monte Carlo estimate of the interaction energy.
#[pyfunction]
#[pyo3(signature = (stream, tau, n, seed = 42, workers = None, g = None, channel = "real", channels = 1))]
#[allow(clippy::too_many_arguments)]
fn stochastic_estimate(
    py: Python<'_>,
    stream: &PyEigenStream,
    tau: f64,
    n: u64,
    seed: u64,
    workers: Option<usize>,
    g: Option<f64>,
    channel: &str,
    channels: usize,
) -> PyResult<Py<PyAny>> {
    let spec = source(stream, tau, g, channel, channels)?;
    to_py(py, &stochastic::mc_estimate(&spec, n, seed, self::workers(workers)).map_err(err)?)
}

/// Energies `U` at `g` for fixed noise draws `noise`.
#[pyfunction]
#[pyo3(signature = (stream, tau, noise, g = None, channel = "real", channels = 1))]
fn energy_from_noise(
    stream: &PyEigenStream,
    tau: f64,
    noise: Vec<f64>,
    g: Option<f64>,
    channel: &str,
    channels: usize,
) -> PyResult<f64> {
    stochastic::energy_from_noise(&source(stream, tau, g, channel, channels)?, &noise).map_err(err)
}

/// `method` is "t_integral", "quadrature_3d" or "monte_carlo". Monte Carlo
/// returns the estimate as a dict, the others a float.
#[pyfunction]
#[pyo3(signature = (alpha, method = "t_integral", mc_pairs = 10_000_000, seed = 42, workers = None, rel_tol = 1e-12))]
fn delta_alpha(
    py: Python<'_>,
    alpha: f64,
    method: &str,
    mc_pairs: u64,
    seed: u64,
    workers: Option<usize>,
    rel_tol: f64,
) -> PyResult<Py<PyAny>> {
    let budget = DeltaBudget { rel_tol, mc_pairs, seed, workers: self::workers(workers) };
    let method: DeltaMethod = parse("box integral method", method)?;
    to_py(py, &boxint::delta_alpha(alpha, method, &budget).map_err(err)?)
}

#[pyfunction]
fn delta_cube_closed_form() -> f64 {
    boxint::delta_cube_closed_form()
}

#[pyfunction]
fn overlap_j(r: f64) -> f64 {
    boxint::overlap_j(r)
}

#[pyfunction]
#[pyo3(signature = (t_grid = None, u_grid = None, h = None))]
fn log_concavity_scan(
    py: Python<'_>,
    t_grid: Option<Vec<f64>>,
    u_grid: Option<Vec<f64>>,
    h: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let (tg, ug, hd) = boxint::default_concavity_grids();
    let r = boxint::log_concavity_scan(&t_grid.unwrap_or(tg), &u_grid.unwrap_or(ug), h.unwrap_or(hd)).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (r_grid = None, fd_tol = 1e-6))]
fn positivity_chain(py: Python<'_>, r_grid: Option<Vec<f64>>, fd_tol: f64) -> PyResult<Py<PyAny>> {
    let grid = r_grid.unwrap_or_else(boxint::default_chain_grid);
    to_py(py, &boxint::positivity_chain(&grid, fd_tol).map_err(err)?)
}

#[pyfunction]
fn per_area_trace(a: f64, tau: f64) -> PyResult<(f64, f64)> {
    let s = plates::per_area_trace(a, tau).map_err(err)?;
    Ok((s.value, s.tail_bound))
}

/// `method` is "heat_fit" or "zeta_route".
#[pyfunction]
#[pyo3(signature = (a, method = "heat_fit", channels = 1))]
fn casimir_per_area(a: f64, method: &str, channels: usize) -> PyResult<f64> {
    plates::casimir_per_area(a, parse::<CasimirMethod>("plate method", method)?, channels).map_err(err)
}

/// `source` is "closed_form" or "pipeline".
#[pyfunction]
#[pyo3(signature = (alpha, channels = 2, source = "closed_form"))]
fn theta_bar(py: Python<'_>, alpha: f64, channels: usize, source: &str) -> PyResult<Py<PyAny>> {
    let r = plates::theta_bar(alpha, channels, parse::<ThetaSource>("theta source", source)?).map_err(err)?;
    to_py(py, &r)
}

/// Runs a harness command and returns the report. Files are written only
/// when `output_dir` is given.
#[pyfunction]
#[pyo3(signature = (command, parameters = None, seed = 42, workers = None, output_dir = None, format = "json"))]
fn run(
    py: Python<'_>,
    command: &str,
    parameters: Option<&Bound<'_, PyAny>>,
    seed: u64,
    workers: Option<usize>,
    output_dir: Option<std::path::PathBuf>,
    format: &str,
) -> PyResult<Py<PyAny>> {
    let command: Command = parse("command", command)?;
    let parameters: Parameters = match parameters {
        Some(p) => from_py(py, p)?,
        None => Parameters::default(),
    };
    let file = ConfigFile {
        command: Some(command),
        seed: Some(seed),
        workers,
        output_dir: output_dir.clone(),
        format: Some(parse::<OutputFormat>("format", format)?),
        parameters,
    };
    let config = file.resolve(None).map_err(err)?;
    let report = match output_dir {
        Some(_) => harness::run(&config).map_err(err)?.report,
        None => harness::execute(&config),
    };
    to_py(py, &report)
}

/// Acceptance outcomes as a list of dicts; `line` holds the summary string.
#[pyfunction]
#[pyo3(signature = (seed = 42, workers = None, criteria = None))]
fn verify_all(py: Python<'_>, seed: u64, workers: Option<usize>, criteria: Option<Vec<u32>>) -> PyResult<Py<PyAny>> {
    let opts = VerifyOptions { seed, workers: self::workers(workers) };
    let ids = criteria.unwrap_or_else(|| verify::CRITERIA.to_vec());
    let out: Vec<serde_json::Value> = ids
        .iter()
        .map(|&id| {
            let o = verify::run_criterion(id, &opts);
            let mut v = serde_json::to_value(&o).unwrap_or_default();
            v["line"] = o.line().into();
            v
        })
        .collect();
    to_py(py, &out)
}

#[pymodule]
fn speclab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpeclabError", m.py().get_type::<SpeclabError>())?;
    m.add("__version__", harness::VERSION)?;
    m.add_class::<PyBoxSpec>()?;
    m.add_class::<PyEigenStream>()?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(erf, m)?)?;
    m.add_function(wrap_pyfunction!(erfc, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_negative_odd, m)?)?;
    m.add_function(wrap_pyfunction!(reduction_constant, m)?)?;
    m.add_function(wrap_pyfunction!(critical_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(momentum_integral, m)?)?;
    m.add_function(wrap_pyfunction!(schwinger_integral, m)?)?;
    m.add_function(wrap_pyfunction!(mollified_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(restriction_limit, m)?)?;
    m.add_function(wrap_pyfunction!(two_step_chain, m)?)?;
    m.add_function(wrap_pyfunction!(lateral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_check, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_cell_heat_trace, m)?)?;
    m.add_function(wrap_pyfunction!(b_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(volume_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_cell_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(finite_part, m)?)?;
    m.add_function(wrap_pyfunction!(expected_energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_variance, m)?)?;
    m.add_function(wrap_pyfunction!(stochastic_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(energy_from_noise, m)?)?;
    m.add_function(wrap_pyfunction!(delta_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(delta_cube_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_j, m)?)?;
    m.add_function(wrap_pyfunction!(log_concavity_scan, m)?)?;
    m.add_function(wrap_pyfunction!(positivity_chain, m)?)?;
    m.add_function(wrap_pyfunction!(per_area_trace, m)?)?;
    m.add_function(wrap_pyfunction!(casimir_per_area, m)?)?;
    m.add_function(wrap_pyfunction!(theta_bar, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
