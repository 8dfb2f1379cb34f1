use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::device::VirtualDevice;
use super::fit::{fit_zpl, ZplFit};
use super::spectrum::{emitter_environment, synthesize_spectrum, EmitterEnvironment};
use crate::emitter::ThermalResponse;
use crate::error::{Error, Result};
use crate::solver::{solve_bias_sweep, BiasPoint, ConfocalSpot};

/// Solved bias points and the per-emitter environment at each.
#[derive(Debug, Clone)]
pub struct SweepStates {
    pub points: Vec<BiasPoint>,
    pub environments: Vec<EmitterEnvironment>,
    /// Thermal response applied at each bias.
    pub thermal: Vec<ThermalResponse>,
    /// Junction temperature at each bias [K].
    pub temperatures: Vec<f64>,
    /// Electrical power used for heating [W].
    pub powers: Vec<f64>,
}

impl SweepStates {
    pub fn voltages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.voltage).collect()
    }
}

/// Heating from `power_scale`·|I·V| through the thermal model.
pub fn solve_sweep_states(
    device: &VirtualDevice,
    voltages: &[f64],
    power_scale: f64,
) -> Result<SweepStates> {
    let points = solve_bias_sweep(&device.simulation, voltages).into_result()?;
    let environments = points
        .par_iter()
        .map(|p| emitter_environment(&p.state, &device.equilibrium, &device.emitters, &device.models))
        .collect();
    let thermal_model = &device.models.thermal;
    let mut powers = Vec::with_capacity(points.len());
    let mut temperatures = Vec::with_capacity(points.len());
    let mut thermal = Vec::with_capacity(points.len());
    for p in &points {
        let power = power_scale * (p.terminal_current * p.voltage).abs();
        let t = thermal_model.junction_temperature(power)?;
        powers.push(power);
        temperatures.push(t);
        thermal.push(thermal_model.thermal_quench(t));
    }
    Ok(SweepStates {
        points,
        environments,
        thermal,
        temperatures,
        powers,
    })
}

/// Spectra versus bias at one spot, normalized to the zero-bias peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub bias_list: Vec<f64>,
    /// Absolute frequencies [THz].
    pub frequency_grid: Vec<f64>,
    /// Detunings from the grid center [GHz].
    pub offsets: Vec<f64>,
    pub grid_center: f64,
    /// bias × frequency.
    pub intensity: Vec<Vec<f64>>,
    /// Spectrally integrated intensity relative to zero bias.
    pub integrated: Vec<f64>,
    /// Weighted mean line position [GHz from the grid center].
    pub first_moment: Vec<f64>,
    /// No emitter in the spot contributes.
    pub empty: Vec<bool>,
    pub spot: ConfocalSpot,
}

impl SpectrumSeries {
    fn zero_bias_index(&self) -> Result<usize> {
        self.bias_list
            .iter()
            .position(|v| *v == 0.0)
            .ok_or_else(|| Error::InvalidInput("series has no zero-bias entry".into()))
    }
}

pub fn series_from_states(
    device: &VirtualDevice,
    states: &SweepStates,
    spot: &ConfocalSpot,
) -> Result<SpectrumSeries> {
    spot.validate()?;
    let models = &device.models;
    let spectra: Vec<_> = states
        .environments
        .par_iter()
        .zip(&states.thermal)
        .map(|(env, th)| synthesize_spectrum(spot, &device.emitters, env, *th, models))
        .collect();
    let bias_list = states.voltages();
    let zero = bias_list
        .iter()
        .position(|v| *v == 0.0)
        .ok_or_else(|| Error::InvalidInput("sweep has no zero-bias point".into()))?;
    let peak = spectra[zero].intensity.iter().copied().fold(0.0, f64::max);
    let weight0 = spectra[zero].total_weight;
    let norm = |v: f64, d: f64| if d > 0.0 { v / d } else { 0.0 };
    Ok(SpectrumSeries {
        frequency_grid: models.grid.frequencies_thz(),
        offsets: models.grid.offsets_ghz(),
        grid_center: models.grid.center,
        intensity: spectra
            .iter()
            .map(|s| s.intensity.iter().map(|v| norm(*v, peak)).collect())
            .collect(),
        integrated: spectra.iter().map(|s| norm(s.total_weight, weight0)).collect(),
        first_moment: spectra.iter().map(|s| s.first_moment).collect(),
        empty: spectra.iter().map(|s| s.empty).collect(),
        bias_list,
        spot: *spot,
    })
}

/// Solver sweep plus one spectrum per bias point at `spot`.
pub fn voltage_sweep_spectra(
    device: &VirtualDevice,
    spot: &ConfocalSpot,
    voltages: &[f64],
) -> Result<SpectrumSeries> {
    let states = solve_sweep_states(device, voltages, 1.0)?;
    series_from_states(device, &states, spot)
}

/// Fit every spectrum of a series; series intensities are already
/// normalized, so the detection floor applies directly to the amplitude.
pub fn fit_series(series: &SpectrumSeries, floor: f64) -> Result<Vec<ZplFit>> {
    series
        .intensity
        .par_iter()
        .map(|y| fit_zpl(&series.offsets, y, series.grid_center, None, floor))
        .collect()
}

/// Per-bias modulation of the fitted line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationPoint {
    pub bias: f64,
    /// Fitted amplitude over zero-bias amplitude, 0 once below the floor.
    pub ratio: f64,
    /// Same without the floor.
    pub raw_ratio: f64,
    pub below_floor: bool,
}

pub fn modulation_ratio(
    series: &SpectrumSeries,
    fits: &[ZplFit],
    floor: f64,
) -> Result<Vec<ModulationPoint>> {
    if fits.len() != series.bias_list.len() {
        return Err(Error::InvalidInput("one fit per bias point expected".into()));
    }
    let zero = series.zero_bias_index()?;
    let a0 = fits[zero].amplitude;
    if !(a0 > 0.0) {
        return Err(Error::InvalidInput("zero-bias spectrum has no line".into()));
    }
    Ok(series
        .bias_list
        .iter()
        .zip(fits)
        .map(|(&bias, f)| {
            let raw = (f.amplitude / a0).max(0.0);
            let below = raw < floor;
            ModulationPoint {
                bias,
                ratio: if below { 0.0 } else { raw },
                raw_ratio: raw,
                below_floor: below,
            }
        })
        .collect())
}

/// Fitted center shift from zero bias [GHz].
pub fn center_shifts(series: &SpectrumSeries, fits: &[ZplFit]) -> Result<Vec<f64>> {
    let zero = series.zero_bias_index()?;
    let c0 = fits[zero].center;
    Ok(fits.iter().map(|f| (f.center - c0) * 1e3).collect())
}

/// Smallest |V| at which |shift| first exceeds `criterion` [GHz], linearly
/// interpolated between bias points. `None` when never exceeded.
pub fn threshold_from_shifts(voltages: &[f64], shifts: &[f64], criterion: f64) -> Option<f64> {
    let k = shifts.iter().position(|s| s.abs() > criterion)?;
    if k == 0 {
        return Some(voltages[0].abs());
    }
    let (v0, v1) = (voltages[k - 1].abs(), voltages[k].abs());
    let (s0, s1) = (shifts[k - 1].abs(), shifts[k].abs());
    let t = ((criterion - s0) / (s1 - s0)).clamp(0.0, 1.0);
    Some(v0 + t * (v1 - v0))
}

/// Threshold voltage at `position` for an already-solved sweep.
pub fn threshold_voltage(
    device: &VirtualDevice,
    states: &SweepStates,
    position: f64,
    criterion: f64,
) -> Result<Option<f64>> {
    let series = series_from_states(device, states, &device.spot(position))?;
    let fits = fit_series(&series, device.models.detection_floor)?;
    let shifts = center_shifts(&series, &fits)?;
    Ok(threshold_from_shifts(&series.bias_list, &shifts, criterion))
}

/// The reverse sweep 0, −step, …, −end.
pub fn reverse_voltages(end: f64, step: f64) -> Vec<f64> {
    let n = (end.abs() / step.abs()).round() as usize;
    (0..=n).map(|k| -(k as f64) * step.abs()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_interpolates() {
        let v = [0.0, -10.0, -20.0, -30.0];
        let s = [0.0, -1.0, -3.0, -10.0];
        let t = threshold_from_shifts(&v, &s, 2.0).unwrap();
        assert!((t - 15.0).abs() < 1e-12);
        assert_eq!(threshold_from_shifts(&v, &s, 20.0), None);
    }

    #[test]
    fn default_reverse_sweep_has_22_points() {
        let v = reverse_voltages(210.0, 10.0);
        assert_eq!(v.len(), 22);
        assert_eq!(v[21], -210.0);
    }
}
