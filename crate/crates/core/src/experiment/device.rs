use serde::{Deserialize, Serialize};

use super::spectrum::OpticalModels;
use crate::emitter::{sample_ensemble, Emitter, EnsembleSpec};
use crate::error::{Error, Result};
use crate::solver::{solve_equilibrium_problem, ConfocalSpot, PhotoOptions, Simulation, SolverState};

/// Confocal excitation settings shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationOptions {
    /// 1/e² radius [µm].
    pub waist: f64,
    /// Optical power [W].
    pub power: f64,
    pub photo: PhotoOptions,
}

impl Default for ExcitationOptions {
    fn default() -> Self {
        Self {
            waist: 1.0,
            power: 1e-4,
            photo: PhotoOptions::default(),
        }
    }
}

impl ExcitationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0) {
            return Err(Error::config("excitation.waist", "must be positive"));
        }
        if !(self.power >= 0.0) {
            return Err(Error::config("excitation.power", "must be non-negative"));
        }
        if !(self.photo.absorption_efficiency >= 0.0 && self.photo.absorption_efficiency <= 1.0) {
            return Err(Error::config(
                "excitation.photo.absorption_efficiency",
                "must lie in [0, 1]",
            ));
        }
        if !(self.photo.wavelength_nm > 0.0) {
            return Err(Error::config("excitation.photo.wavelength_nm", "must be positive"));
        }
        Ok(())
    }
}

/// Diode plus emitter ensemble plus optics: the object every virtual
/// experiment runs on.
#[derive(Debug, Clone)]
pub struct VirtualDevice {
    pub simulation: Simulation,
    pub ensemble: EnsembleSpec,
    pub emitters: Vec<Emitter>,
    pub models: OpticalModels,
    pub excitation: ExcitationOptions,
    pub equilibrium: SolverState,
}

impl VirtualDevice {
    pub fn new(
        simulation: Simulation,
        ensemble: EnsembleSpec,
        models: OpticalModels,
        excitation: ExcitationOptions,
    ) -> Result<Self> {
        models.validate()?;
        excitation.validate()?;
        let emitters = sample_ensemble(&ensemble)?;
        let equilibrium = solve_equilibrium_problem(&simulation.problem, &simulation.options)?;
        Ok(Self {
            simulation,
            ensemble,
            emitters,
            models,
            excitation,
            equilibrium,
        })
    }

    /// Same device with a different Stark coefficient magnitude. Positions,
    /// angles and frequencies are unchanged since they use the same seed.
    pub fn with_dipole_scale(&self, scale: f64) -> Result<Self> {
        let mut ensemble = self.ensemble.clone();
        ensemble.differential_dipole_scale = scale;
        let emitters = sample_ensemble(&ensemble)?;
        Ok(Self {
            ensemble,
            emitters,
            ..self.clone()
        })
    }

    pub fn spot(&self, position: f64) -> ConfocalSpot {
        ConfocalSpot {
            position,
            waist: self.excitation.waist,
            power: self.excitation.power,
        }
    }
}
