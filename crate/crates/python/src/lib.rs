//! Python bindings for the `gdiode` simulator.
//!
//! Every entry point takes an optional TOML string; missing keys fall back to
//! the defaults printed by `default_config()`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gdiode::config::RunConfig;
use gdiode::experiment::{
    calibrate_stark, center_shifts, fit_series, fit_zpl, iv_sweep, series_from_states, solve_sweep_states,
    SweepStates, VirtualDevice,
};
use gdiode::solver::{band_diagram, depletion_width, solve_bias_sweep, solve_equilibrium_problem};
use gdiode::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load(config: Option<&str>) -> PyResult<RunConfig> {
    let cfg = match config {
        Some(t) => RunConfig::from_toml_str(t),
        None => Ok(RunConfig::default()),
    }
    .map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Reverse sweep with the Stark scale calibrated when the configured one is 0.
fn calibrated(cfg: &RunConfig) -> gdiode::Result<(VirtualDevice, SweepStates, f64)> {
    let device = cfg.build_device()?;
    let states = solve_sweep_states(&device, &cfg.sweep_voltages(), 1.0)?;
    if cfg.ensemble.differential_dipole_scale > 0.0 {
        let scale = cfg.ensemble.differential_dipole_scale;
        return Ok((device, states, scale));
    }
    let cal = calibrate_stark(&device, &states, cfg.probe_position(), cfg.experiment.stark_target_rate)?;
    Ok((device.with_dipole_scale(cal.scale)?, states, cal.scale))
}

/// Effective configuration as TOML.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn default_config(config: Option<&str>) -> PyResult<String> {
    load(config)?.to_toml().map_err(to_py)
}

/// Equilibrium solution: positions [µm], potential [V], carrier densities
/// [cm⁻³] and band edges [eV].
#[pyfunction]
#[pyo3(signature = (config=None))]
fn equilibrium<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config)?;
    let sim = cfg.simulation().map_err(to_py)?;
    let state = py
        .detach(|| solve_equilibrium_problem(&sim.problem, &sim.options))
        .map_err(to_py)?;
    let bands = band_diagram(&state);
    let d = PyDict::new(py);
    d.set_item("x_um", state.mesh().nodes().to_vec())?;
    d.set_item("psi", state.psi.clone())?;
    d.set_item("n", state.n.clone())?;
    d.set_item("p", state.p.clone())?;
    d.set_item("ec", bands.ec)?;
    d.set_item("ev", bands.ev)?;
    d.set_item("efn", bands.efn)?;
    d.set_item("efp", bands.efp)?;
    Ok(d)
}

/// Continuation sweep from 0 V. Returns (voltage, terminal current [A],
/// depletion width [µm]) per point; the first voltage must be 0.
#[pyfunction]
#[pyo3(signature = (voltages, config=None))]
fn bias_sweep(py: Python<'_>, voltages: Vec<f64>, config: Option<&str>) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = load(config)?;
    let sim = cfg.simulation().map_err(to_py)?;
    let points = py
        .detach(|| solve_bias_sweep(&sim, &voltages).into_result())
        .map_err(to_py)?;
    Ok(points
        .iter()
        .map(|p| (p.voltage, p.terminal_current, depletion_width(&p.state)))
        .collect())
}

/// Terminal current [A] at each voltage; the list must contain 0 V.
#[pyfunction]
#[pyo3(signature = (voltages=None, config=None))]
fn iv(py: Python<'_>, voltages: Option<Vec<f64>>, config: Option<&str>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = load(config)?;
    let volts = voltages.unwrap_or_else(|| cfg.experiment.iv_voltages.clone());
    let sim = cfg.simulation().map_err(to_py)?;
    let curve = py.detach(|| iv_sweep(&sim, &volts)).map_err(to_py)?;
    Ok((curve.voltages, curve.currents))
}

/// Calibrated `differential_dipole_scale` [GHz per V/cm].
#[pyfunction]
#[pyo3(signature = (config=None))]
fn calibrate(py: Python<'_>, config: Option<&str>) -> PyResult<f64> {
    let cfg = load(config)?;
    let (_, _, scale) = py.detach(|| calibrated(&cfg)).map_err(to_py)?;
    Ok(scale)
}

/// Ensemble line-center shift [GHz] across the reverse sweep at `position`
/// [µm] (default: the calibration probe). Returns (voltages, shifts).
#[pyfunction]
#[pyo3(signature = (position=None, config=None))]
fn stark_shifts(py: Python<'_>, position: Option<f64>, config: Option<&str>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = load(config)?;
    let x = position.unwrap_or_else(|| cfg.probe_position());
    let floor = cfg.optics.detection_floor;
    py.detach(|| {
        let (device, states, _) = calibrated(&cfg)?;
        let series = series_from_states(&device, &states, &device.spot(x))?;
        let fits = fit_series(&series, floor)?;
        let shifts = center_shifts(&series, &fits)?;
        Ok((series.bias_list, shifts))
    })
    .map_err(to_py)
}

/// Lorentzian fit of a spectrum given as detunings [GHz] and intensities.
/// Returns a dict with center offset [GHz], FWHM [GHz], amplitude,
/// background and convergence flags.
#[pyfunction]
#[pyo3(signature = (offsets_ghz, intensity, floor=0.0))]
fn fit_lorentzian<'py>(
    py: Python<'py>,
    offsets_ghz: Vec<f64>,
    intensity: Vec<f64>,
    floor: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = fit_zpl(&offsets_ghz, &intensity, 0.0, None, floor).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("center_ghz", fit.center * 1e3)?;
    d.set_item("fwhm_ghz", fit.fwhm)?;
    d.set_item("amplitude", fit.amplitude)?;
    d.set_item("background", fit.background)?;
    d.set_item("converged", fit.converged)?;
    d.set_item("no_line", fit.no_line)?;
    Ok(d)
}

#[pymodule]
fn gdiode_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(bias_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(iv, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(stark_shifts, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lorentzian, m)?)?;
    Ok(())
}
