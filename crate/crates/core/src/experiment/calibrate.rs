use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use super::device::VirtualDevice;
use super::spectrum::integrated_response;
use super::sweep::SweepStates;
use crate::error::{Error, Result};

/// Result of fitting the Stark coefficient magnitude to a target tuning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkCalibration {
    /// Calibrated `differential_dipole_scale` [GHz per V/cm].
    pub scale: f64,
    pub target_rate: f64,
    /// Rate reached with `scale` [GHz/V].
    pub achieved_rate: f64,
    pub probe_position: f64,
    /// Bias points used for the slope [V].
    pub interval: Vec<f64>,
}

/// Fraction of the sweep's largest spot-averaged field that marks the start
/// of the post-threshold interval.
const FIELD_ONSET: f64 = 0.05;

/// Bias indices with field at the probe and a line above the floor.
fn post_threshold_indices(device: &VirtualDevice, states: &SweepStates, probe: f64) -> Vec<usize> {
    let spot = device.spot(probe);
    let weights: Vec<f64> = device.emitters.iter().map(|e| spot.intensity_at(e.position)).collect();
    let stats: Vec<(f64, f64)> = states
        .environments
        .iter()
        .zip(&states.thermal)
        .map(|(env, th)| {
            let (mut w, mut we) = (0.0, 0.0);
            for (i, s) in weights.iter().enumerate() {
                let wi = s * env.bright[i];
                w += wi;
                we += wi * env.field[i].abs();
            }
            (if w > 0.0 { we / w } else { 0.0 }, w * th.intensity_factor)
        })
        .collect();
    let e_max = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let zero = states.points.iter().position(|p| p.voltage == 0.0).unwrap_or(0);
    let w0 = stats[zero].1;
    stats
        .iter()
        .enumerate()
        .filter(|(_, (e, w))| {
            e_max > 0.0 && *e >= FIELD_ONSET * e_max && w0 > 0.0 && w / w0 >= device.models.detection_floor
        })
        .map(|(i, _)| i)
        .collect()
}

/// Least-squares slope of |first-moment shift| against |V| [GHz/V].
fn moment_rate(device: &VirtualDevice, states: &SweepStates, probe: f64, idx: &[usize]) -> f64 {
    let spot = device.spot(probe);
    let zero = states.points.iter().position(|p| p.voltage == 0.0).unwrap_or(0);
    let moment = |i: usize| {
        integrated_response(
            &device.emitters,
            &states.environments[i],
            &spot,
            states.thermal[i],
            &device.models,
        )
        .1
    };
    let m0 = moment(zero);
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (states.points[i].voltage.abs(), (moment(i) - m0).abs()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Root-find the dipole scale so that the first-moment tuning rate at
/// `probe` over the post-threshold interval equals `target_rate` [GHz/V].
pub fn calibrate_stark(
    device: &VirtualDevice,
    states: &SweepStates,
    probe: f64,
    target_rate: f64,
) -> Result<StarkCalibration> {
    if !(target_rate >= 0.0) {
        return Err(Error::config("calibration.target_rate", "must be non-negative"));
    }
    let idx = post_threshold_indices(device, states, probe);
    if idx.len() < 2 {
        return Err(Error::Calibration(format!(
            "fewer than two post-threshold bias points at {probe} µm"
        )));
    }
    let interval = idx.iter().map(|&i| states.points[i].voltage).collect();
    let done = |scale: f64, achieved_rate: f64| StarkCalibration {
        scale,
        target_rate,
        achieved_rate,
        probe_position: probe,
        interval,
    };
    if target_rate == 0.0 {
        return Ok(done(0.0, 0.0));
    }

    let mut failure = None;
    let mut residual = |s: f64| match device.with_dipole_scale(s) {
        Ok(d) => moment_rate(&d, states, probe, &idx) - target_rate,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    // Grow the bracket until the rate overshoots the target.
    let mut hi = 1e-3;
    while residual(hi) < 0.0 {
        hi *= 4.0;
        if hi > 1e3 {
            return Err(Error::Calibration(format!(
                "no sign change up to scale {hi:e}; the probe sees no field"
            )));
        }
    }
    let mut conv = SimpleConvergency {
        eps: 1e-15,
        max_iter: 200,
    };
    let root = find_root_brent(0.0, hi, &mut residual, &mut conv);
    if let Some(e) = failure {
        return Err(e);
    }
    let scale = root.map_err(|e| Error::Calibration(format!("{e}")))?;
    let achieved = moment_rate(&device.with_dipole_scale(scale)?, states, probe, &idx);
    Ok(done(scale, achieved))
}
