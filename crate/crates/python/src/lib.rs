//! Python bindings: configuration, channel sampling, the solvers and the
//! scenario runner.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lisee::harness::{aggregate, emit_outputs, run_scenario as run, Scenario};
use lisee::linalg::CMatrix;
use lisee::model::{energy_efficiency as ee_of, SolveReport};
use lisee::phase::quantize_phases as quantize;
use lisee::solver::{alternating_ee_max, exhaustive_search as exhaustive, relay_baseline as relay, Termination};
use lisee::units;
use lisee::{ChannelSet, Resolution, SystemConfig};

fn to_py(e: lisee::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_resolution(s: &str) -> PyResult<Resolution> {
    s.parse().map_err(to_py)
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "SystemConfig", module = "pylisee", skip_from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    /// Powers in dBm; `resolution` is a bit count or "continuous".
    #[new]
    #[pyo3(signature = (m, k, n, resolution = "1", p_budget_dbm = 20.0, sigma2_dbm = 0.0, p_c_dbm = 100.0, epsilon = 0.01))]
    #[allow(clippy::too_many_arguments)]
    fn new(m: usize, k: usize, n: usize, resolution: &str, p_budget_dbm: f64, sigma2_dbm: f64, p_c_dbm: f64, epsilon: f64) -> PyResult<Self> {
        let mut inner = SystemConfig::new(m, k, n);
        inner.resolution = parse_resolution(resolution)?;
        inner.p_budget = units::dbm_to_watts(p_budget_dbm);
        inner.sigma2 = units::dbm_to_watts(sigma2_dbm);
        inner.p_c = units::dbm_to_watts(p_c_dbm);
        inner.epsilon = epsilon;
        inner.validate().map_err(to_py)?;
        Ok(PySystemConfig { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn resolution(&self) -> String {
        self.inner.resolution.to_string()
    }

    #[setter]
    fn set_resolution(&mut self, value: &str) -> PyResult<()> {
        self.inner.resolution = parse_resolution(value)?;
        Ok(())
    }

    /// Transmit budget in watts.
    #[getter]
    fn p_budget(&self) -> f64 {
        self.inner.p_budget
    }

    #[setter]
    fn set_p_budget(&mut self, watts: f64) {
        self.inner.p_budget = watts;
    }

    /// Noise variance in watts.
    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[setter]
    fn set_sigma2(&mut self, watts: f64) {
        self.inner.sigma2 = watts;
    }

    /// Circuit power per user link in watts.
    #[getter]
    fn p_c(&self) -> f64 {
        self.inner.p_c
    }

    #[setter]
    fn set_p_c(&mut self, watts: f64) {
        self.inner.p_c = watts;
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.clone()
    }

    #[setter]
    fn set_mu(&mut self, mu: Vec<f64>) {
        self.inner.mu = mu;
    }

    /// Per-user minimum rates, bits/s/Hz.
    #[getter]
    fn r_min(&self) -> Vec<f64> {
        self.inner.r_min.clone()
    }

    #[setter]
    fn set_r_min(&mut self, r_min: Vec<f64>) {
        self.inner.r_min = r_min;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(m={}, k={}, n={}, resolution={}, p_budget={:.4e} W)",
            self.inner.m, self.inner.k, self.inner.n, self.inner.resolution, self.inner.p_budget
        )
    }
}

#[pyclass(name = "ChannelSet", module = "pylisee", frozen)]
struct PyChannelSet {
    inner: ChannelSet,
}

#[pymethods]
impl PyChannelSet {
    /// BS to surface, N x M.
    #[getter]
    fn h1(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.h1)
    }

    /// Surface to users, K x N.
    #[getter]
    fn h2(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.h2)
    }

    /// BS to users, K x M.
    #[getter]
    fn h(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.h)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.m(), self.inner.k(), self.inner.n())
    }
}

#[pyclass(name = "SolveReport", module = "pylisee", frozen, get_all)]
struct PySolveReport {
    ee: f64,
    sum_rate: f64,
    total_power: f64,
    theta: Vec<f64>,
    powers: Vec<f64>,
    outer_iterations: usize,
    feasible: bool,
    method: String,
}

impl From<SolveReport> for PySolveReport {
    fn from(r: SolveReport) -> Self {
        PySolveReport {
            ee: r.ee,
            sum_rate: r.sum_rate,
            total_power: r.total_power,
            theta: r.phases.theta,
            powers: r.powers.p,
            outer_iterations: r.outer_iterations,
            feasible: r.feasible,
            method: r.method,
        }
    }
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(method={}, ee={:.6e}, sum_rate={:.4}, total_power={:.4e}, feasible={})",
            self.method, self.ee, self.sum_rate, self.total_power, self.feasible
        )
    }
}

#[pyfunction]
fn sample_channels(config: &PySystemConfig, seed: u64) -> PyResult<PyChannelSet> {
    Ok(PyChannelSet {
        inner: lisee::sample_channels(&config.inner, seed).map_err(to_py)?,
    })
}

/// Returns the best feasible report and the termination reason
/// ("converged", "infeasible" or "iteration-cap").
#[pyfunction]
fn alternating(channels: &PyChannelSet, config: &PySystemConfig, seed: u64) -> PyResult<(PySolveReport, &'static str)> {
    let (report, trace) = alternating_ee_max(&channels.inner, &config.inner, seed).map_err(to_py)?;
    let why = match trace.termination {
        Termination::Converged => "converged",
        Termination::Infeasible => "infeasible",
        Termination::IterationCap => "iteration-cap",
    };
    Ok((report.into(), why))
}

#[pyfunction]
fn exhaustive_search(channels: &PyChannelSet, config: &PySystemConfig) -> PyResult<PySolveReport> {
    Ok(exhaustive(&channels.inner, &config.inner).map_err(to_py)?.into())
}

#[pyfunction]
fn relay_baseline(channels: &PyChannelSet, config: &PySystemConfig) -> PyResult<PySolveReport> {
    Ok(relay(&channels.inner, &config.inner).map_err(to_py)?.into())
}

/// Energy-efficient powers for fixed phases.
#[pyfunction]
fn dinkelbach(channels: &PyChannelSet, theta: Vec<f64>, config: &PySystemConfig) -> PyResult<Vec<f64>> {
    Ok(lisee::power::dinkelbach(&channels.inner, &theta, &config.inner).map_err(to_py)?.0.p)
}

#[pyfunction]
fn energy_efficiency(channels: &PyChannelSet, theta: Vec<f64>, powers: Vec<f64>, config: &PySystemConfig) -> PyResult<f64> {
    ee_of(&channels.inner, &theta, &powers, &config.inner).map_err(to_py)
}

#[pyfunction]
fn quantize_phases(theta: Vec<f64>, resolution: &str) -> PyResult<Vec<f64>> {
    Ok(quantize(&theta, parse_resolution(resolution)?).map_err(to_py)?.theta)
}

#[pyfunction]
fn dbm_to_watts(dbm: f64) -> f64 {
    units::dbm_to_watts(dbm)
}

#[pyfunction]
fn watts_to_dbm(watts: f64) -> f64 {
    units::watts_to_dbm(watts)
}

/// Runs a scenario file, writes its outputs to `out_dir` and returns the
/// aggregate rows as dicts.
#[pyfunction]
#[pyo3(signature = (path, out_dir, workers = None))]
fn run_scenario<'py>(py: Python<'py>, path: PathBuf, out_dir: PathBuf, workers: Option<usize>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let scenario = Scenario::from_file(&path).map_err(to_py)?;
    let aggregates = py
        .detach(|| -> lisee::Result<_> {
            let rows = run(&scenario, workers)?;
            let aggregates = aggregate(&rows);
            emit_outputs(&scenario, &rows, &aggregates, &out_dir)?;
            Ok(aggregates)
        })
        .map_err(to_py)?;
    aggregates
        .into_iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("method", a.method)?;
            d.set_item("sweep", a.sweep)?;
            d.set_item("mean_ee", a.mean_ee)?;
            d.set_item("stderr_ee", a.stderr_ee)?;
            d.set_item("mean_rate", a.mean_rate)?;
            d.set_item("stderr_rate", a.stderr_rate)?;
            d.set_item("feas_rate", a.feas_rate)?;
            d.set_item("trials", a.trials)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pylisee(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyChannelSet>()?;
    m.add_class::<PySolveReport>()?;
    m.add_function(wrap_pyfunction!(sample_channels, m)?)?;
    m.add_function(wrap_pyfunction!(alternating, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_search, m)?)?;
    m.add_function(wrap_pyfunction!(relay_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(dinkelbach, m)?)?;
    m.add_function(wrap_pyfunction!(energy_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_phases, m)?)?;
    m.add_function(wrap_pyfunction!(dbm_to_watts, m)?)?;
    m.add_function(wrap_pyfunction!(watts_to_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
