use serde::{Deserialize, Serialize};

use super::device::VirtualDevice;
use super::fit::ZplFit;
use super::sweep::{fit_series, series_from_states, SpectrumSeries, SweepStates};
use crate::emitter::ExcitonResponse;
use crate::error::{Error, Result};
use crate::solver::{solve_bias_sweep, BiasPoint, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVCurve {
    pub voltages: Vec<f64>,
    /// Terminal current [A], positive from p to n.
    pub currents: Vec<f64>,
}

impl IVCurve {
    pub fn csv(&self) -> String {
        crate::solver::iv_csv(&self.voltages, &self.currents)
    }
}

/// Solve the non-positive and non-negative branches as two continuation
/// sweeps from 0 V and report currents in input order.
pub fn iv_sweep(sim: &Simulation, voltages: &[f64]) -> Result<IVCurve> {
    if !voltages.contains(&0.0) {
        return Err(Error::InvalidInput("IV voltages must include 0 V".into()));
    }
    if voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("IV voltages must be finite".into()));
    }
    let branch = |sign: f64| -> Result<Vec<BiasPoint>> {
        let mut v: Vec<f64> = voltages.iter().copied().filter(|v| v * sign > 0.0).collect();
        v.sort_by(|a, b| (a * sign).total_cmp(&(b * sign)));
        v.dedup();
        v.insert(0, 0.0);
        solve_bias_sweep(sim, &v).into_result()
    };
    let mut solved = branch(-1.0)?;
    solved.extend(branch(1.0)?.into_iter().skip(1));
    let currents = voltages
        .iter()
        .map(|v| {
            solved
                .iter()
                .find(|p| p.voltage == *v)
                .map(|p| p.terminal_current)
                .expect("every requested voltage was solved")
        })
        .collect();
    Ok(IVCurve {
        voltages: voltages.to_vec(),
        currents,
    })
}

/// Maps simulated electrical power onto the heating of the real device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerCalibration {
    /// Bias at which the reference power is known [V].
    pub reference_voltage: f64,
    /// Dissipated power at that bias [W]; `None` uses the raw I·V.
    pub reference_power: Option<f64>,
}

impl Default for PowerCalibration {
    fn default() -> Self {
        Self {
            reference_voltage: 50.0,
            reference_power: Some(0.45),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardExperiment {
    pub series: SpectrumSeries,
    pub fits: Vec<ZplFit>,
    pub exciton: Vec<ExcitonResponse>,
    /// Exciton intensity relative to zero bias.
    pub exciton_ratio: Vec<f64>,
    pub currents: Vec<f64>,
    pub powers: Vec<f64>,
    pub temperatures: Vec<f64>,
    /// Factor applied to |I·V|.
    pub power_scale: f64,
    /// Requested voltages dropped for exceeding the safety limit.
    pub truncated: Vec<f64>,
}

fn apply_heating(device: &VirtualDevice, states: &mut SweepStates, scale: f64) -> Result<()> {
    let model = &device.models.thermal;
    for (k, p) in states.points.iter().enumerate() {
        let power = scale * (p.terminal_current * p.voltage).abs();
        let t = model.junction_temperature(power)?;
        states.powers[k] = power;
        states.temperatures[k] = t;
        states.thermal[k] = model.thermal_quench(t);
    }
    Ok(())
}

/// Forward sweep with Joule heating of both the G-center ensemble and the
/// free-exciton line. Voltages above the solver's forward safety limit are
/// dropped and listed in `truncated`.
pub fn forward_bias_experiment(
    device: &VirtualDevice,
    position: f64,
    voltages: &[f64],
    power: &PowerCalibration,
) -> Result<ForwardExperiment> {
    let limit = device.simulation.options.forward_safety_limit;
    let (kept, truncated): (Vec<f64>, Vec<f64>) = voltages.iter().partition(|v| **v <= limit);
    if kept.first() != Some(&0.0) {
        return Err(Error::InvalidInput("forward sweep must start at 0 V".into()));
    }
    let mut states = super::sweep::solve_sweep_states(device, &kept, 1.0)?;
    let power_scale = match power.reference_power {
        None => 1.0,
        Some(p_ref) => {
            let v_ref = power.reference_voltage;
            let i_ref = reference_current(device, &states, v_ref)?;
            let raw = (i_ref * v_ref).abs();
            if !(raw > 0.0) {
                return Err(Error::Calibration(format!(
                    "no current at the {v_ref} V power reference"
                )));
            }
            p_ref / raw
        }
    };
    apply_heating(device, &mut states, power_scale)?;
    let series = series_from_states(device, &states, &device.spot(position))?;
    let fits = fit_series(&series, device.models.detection_floor)?;
    let base = device.models.thermal.base_temperature;
    let exciton: Vec<ExcitonResponse> = states
        .temperatures
        .iter()
        .map(|t| device.models.exciton.exciton_response(*t, base))
        .collect();
    let zero = kept.iter().position(|v| *v == 0.0).unwrap_or(0);
    let e0 = exciton[zero].intensity;
    Ok(ForwardExperiment {
        exciton_ratio: exciton.iter().map(|e| e.intensity / e0).collect(),
        exciton,
        currents: states.points.iter().map(|p| p.terminal_current).collect(),
        powers: states.powers.clone(),
        temperatures: states.temperatures.clone(),
        series,
        fits,
        power_scale,
        truncated,
    })
}

/// Current at `v`, re-using the sweep if it contains `v`.
fn reference_current(device: &VirtualDevice, states: &SweepStates, v: f64) -> Result<f64> {
    if let Some(p) = states.points.iter().find(|p| p.voltage == v) {
        return Ok(p.terminal_current);
    }
    let pts = solve_bias_sweep(&device.simulation, &[0.0, v]).into_result()?;
    Ok(pts[1].terminal_current)
}
