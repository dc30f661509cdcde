//! Python bindings: analytic gate predictions and the command runner.

use std::path::Path;

use pgsim_core::cli::{self, Command, RunConfig};
use pgsim_core::effective::{self, Gate};
use pgsim_core::spectroscopy;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: pgsim_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn load(config: Option<&str>) -> PyResult<RunConfig> {
    RunConfig::from_toml_str(config.unwrap_or("")).map_err(py_err)
}

fn gate(name: &str) -> PyResult<Gate> {
    Gate::parse(name).map_err(py_err)
}

fn command(name: &str) -> PyResult<Command> {
    Ok(match name {
        "chevron" => Command::Chevron,
        "strengths" => Command::Strengths,
        "leakage" => Command::Leakage,
        "fidelity" => Command::Fidelity,
        "calibrate" => Command::Calibrate,
        _ => return Err(PyValueError::new_err(format!("unknown command `{name}`"))),
    })
}

/// Fully populated default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml()
}

/// Analytic effective gate strength Ω_eff in GHz.
#[pyfunction]
#[pyo3(signature = (gate_name, delta, theta = -0.108, config = None))]
fn gate_strength(gate_name: &str, delta: f64, theta: f64, config: Option<&str>) -> PyResult<f64> {
    let c = load(config)?;
    effective::gate_strength(&c.device, theta, delta, gate(gate_name)?).map_err(py_err)
}

/// Static dressed resonance plus the analytic AC shift, GHz.
#[pyfunction]
#[pyo3(signature = (gate_name, delta, theta = -0.108, config = None))]
fn predicted_resonance(gate_name: &str, delta: f64, theta: f64, config: Option<&str>) -> PyResult<f64> {
    let c = load(config)?;
    spectroscopy::predicted_resonance(&c.device, &c.hilbert, theta, delta, gate(gate_name)?).map_err(py_err)
}

/// Resonance shift per δ², GHz/Φ0².
#[pyfunction]
#[pyo3(signature = (gate_name, theta = -0.108, config = None))]
fn ac_shift_coefficient(gate_name: &str, theta: f64, config: Option<&str>) -> PyResult<f64> {
    let c = load(config)?;
    effective::ac_shift_coefficient(&c.device, theta, gate(gate_name)?).map_err(py_err)
}

/// Fit the flux scale to (drive amplitude, resonance shift) pairs.
#[pyfunction]
#[pyo3(signature = (pairs, gate_name = "bswap", theta = -0.108, config = None))]
fn calibrate_delta<'py>(
    py: Python<'py>,
    pairs: Vec<(f64, f64)>,
    gate_name: &str,
    theta: f64,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let c = load(config)?;
    let cal = effective::calibrate_delta(&pairs, &c.device, theta, gate(gate_name)?).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("scale", cal.scale)?;
    d.set_item("offset", cal.offset)?;
    d.set_item("residual", cal.residual)?;
    d.set_item("kappa", cal.kappa)?;
    Ok(d)
}

/// Run a CLI command on a TOML config string; returns the written paths.
#[pyfunction]
#[pyo3(signature = (command_name, config = None, out = "out"))]
fn run(py: Python<'_>, command_name: &str, config: Option<&str>, out: &str) -> PyResult<Vec<String>> {
    let cmd = command(command_name)?;
    let c = load(config)?;
    let files = py.allow_threads(|| cli::run(cmd, &c, Path::new(out))).map_err(py_err)?;
    Ok(files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn pgsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli::VERSION)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(gate_strength, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_resonance, m)?)?;
    m.add_function(wrap_pyfunction!(ac_shift_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_delta, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
