//! Declarative run configuration.
//!
//! A config file is a TOML tree whose top-level tables mirror the model
//! types: `[device]`, `[material]`, `[solver]`, `[ensemble]`, `[excitation]`,
//! `[optics]` and `[experiment]`. Every key is optional and falls back to the
//! value in [`RunConfig::default`]. Validation errors carry the dotted path
//! of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::emitter::EnsembleSpec;
use crate::error::{Error, Result};
use crate::experiment::{ExcitationOptions, OpticalModels, PowerCalibration, ScanGrid, VirtualDevice};
use crate::solver::{MaterialParams, Simulation, SolverOptions};

/// Settings of the individual virtual experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Probe distance from the n-side edge of the emitter window [µm].
    pub probe_from_n_edge: f64,
    /// Explicit probe position [µm]; overrides `probe_from_n_edge`.
    pub probe_position: Option<f64>,
    /// Mid-junction probe [µm]; defaults to the window center.
    pub mid_probe_position: Option<f64>,
    /// Stark tuning rate the calibration targets [GHz/V].
    pub stark_target_rate: f64,
    /// Calibrate the Stark scale before sweeps when the configured scale is 0.
    pub auto_calibrate: bool,
    /// Reverse sweep end (magnitude) and step [V].
    pub sweep_end: f64,
    pub sweep_step: f64,
    /// Shift that marks the Stark threshold [GHz].
    pub threshold_criterion: f64,
    /// Probe spacing of the threshold map [µm].
    pub threshold_map_step: f64,
    pub iv_voltages: Vec<f64>,
    pub forward_voltages: Vec<f64>,
    pub power_calibration: PowerCalibration,
    pub scan: ScanGrid,
}

fn stepped(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            probe_from_n_edge: 10.0,
            probe_position: None,
            mid_probe_position: None,
            stark_target_rate: 1.4,
            auto_calibrate: true,
            sweep_end: 210.0,
            sweep_step: 10.0,
            threshold_criterion: 2.0,
            threshold_map_step: 1.0,
            iv_voltages: stepped(-200.0, 20.0, 5.0),
            forward_voltages: stepped(0.0, 60.0, 5.0),
            power_calibration: PowerCalibration::default(),
            scan: ScanGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sweep_end", self.sweep_end),
            ("sweep_step", self.sweep_step),
            ("threshold_criterion", self.threshold_criterion),
            ("threshold_map_step", self.threshold_map_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("experiment.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.stark_target_rate >= 0.0 && self.stark_target_rate.is_finite()) {
            return Err(Error::config("experiment.stark_target_rate", "must be non-negative"));
        }
        if !self.probe_from_n_edge.is_finite() {
            return Err(Error::config("experiment.probe_from_n_edge", "must be finite"));
        }
        for (name, list) in [("iv_voltages", &self.iv_voltages), ("forward_voltages", &self.forward_voltages)] {
            if !list.contains(&0.0) {
                return Err(Error::config(format!("experiment.{name}"), "must include 0 V"));
            }
            if let Some(i) = list.iter().position(|v| !v.is_finite()) {
                return Err(Error::config(format!("experiment.{name}[{i}]"), "must be finite"));
            }
        }
        if let Some(i) = self.forward_voltages.iter().position(|v| *v < 0.0) {
            return Err(Error::config(
                format!("experiment.forward_voltages[{i}]"),
                "forward voltages must be non-negative",
            ));
        }
        let pc = &self.power_calibration;
        if !(pc.reference_voltage > 0.0) || pc.reference_power.is_some_and(|p| !(p > 0.0)) {
            return Err(Error::config(
                "experiment.power_calibration",
                "reference voltage and power must be positive",
            ));
        }
        scoped("experiment.", self.scan.validate())
    }
}

/// Top-level configuration of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSpec,
    pub material: MaterialParams,
    pub solver: SolverOptions,
    pub ensemble: EnsembleSpec,
    pub excitation: ExcitationOptions,
    pub optics: OpticalModels,
    pub experiment: ExperimentConfig,
}

/// Prefixes the field path of a config error with `prefix` unless it is
/// already there.
fn scoped(prefix: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { path, message } if !path.starts_with(prefix) => Error::Config {
            path: format!("{prefix}{path}"),
            message,
        },
        other => other,
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                what: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        scoped("device.", self.device.validate())?;
        scoped("material.", self.material.validate())?;
        scoped("solver.", self.solver.validate())?;
        scoped("ensemble.", self.ensemble.validate())?;
        scoped("excitation.", self.excitation.validate())?;
        scoped("optics.", self.optics.validate())?;
        self.experiment.validate()?;
        let window = self.ensemble.aperture;
        let domain = self.device.simulation_domain();
        if !domain.contains_interval(&window) {
            return Err(Error::config(
                "ensemble.aperture",
                format!(
                    "[{}, {}] must lie inside the simulated span [{}, {}]",
                    window.start, window.end, domain.start, domain.end
                ),
            ));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.ensemble.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ensemble.seed = seed;
        self
    }

    /// Default Stark probe [µm].
    pub fn probe_position(&self) -> f64 {
        self.experiment
            .probe_position
            .unwrap_or(self.ensemble.aperture.end - self.experiment.probe_from_n_edge)
    }

    pub fn mid_probe_position(&self) -> f64 {
        self.experiment
            .mid_probe_position
            .unwrap_or(self.ensemble.aperture.center())
    }

    /// Reverse sweep 0, −step, …, −end.
    pub fn sweep_voltages(&self) -> Vec<f64> {
        crate::experiment::reverse_voltages(self.experiment.sweep_end, self.experiment.sweep_step)
    }

    pub fn simulation(&self) -> Result<Simulation> {
        Simulation::from_spec(&self.device, &self.material, self.solver.clone())
    }

    /// Builds the virtual device with the configured Stark scale.
    pub fn build_device(&self) -> Result<VirtualDevice> {
        VirtualDevice::new(
            self.simulation()?,
            self.ensemble.clone(),
            self.optics.clone(),
            self.excitation.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml_str("[experiment]\nsweep_step = 5.0\n").unwrap();
        assert_eq!(cfg.experiment.sweep_step, 5.0);
        assert_eq!(cfg.device, DeviceSpec::default());
        assert_eq!(cfg.sweep_voltages().len(), 43);
    }

    #[test]
    fn errors_carry_field_paths() {
        let cases = [
            ("[device]\ngap_d = -1.0\n", "device.gap_d"),
            ("[optics.charge_state]\nsigmoid_width = 0.0\n", "optics.charge_state.sigmoid_width"),
            ("[experiment.scan]\nstep = 0.0\n", "experiment.scan"),
            ("[ensemble]\naperture = { start = 10.0, end = 20.0 }\n", "ensemble.aperture"),
        ];
        for (text, want) in cases {
            match RunConfig::from_toml_str(text) {
                Err(Error::Config { path, .. }) => assert_eq!(path, want, "{text}"),
                other => panic!("{text}: expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("bogus = 1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn probe_defaults_follow_the_window() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.probe_position(), 566.5);
        assert_eq!(cfg.mid_probe_position(), 551.5);
        assert_eq!(cfg.sweep_voltages().len(), 22);
    }
}
