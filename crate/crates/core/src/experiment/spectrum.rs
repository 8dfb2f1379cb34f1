use serde::{Deserialize, Serialize};

use crate::emitter::{
    stark_shift, ChargeStateModel, Emitter, ExcitonModel, LocalBands, ThermalModel,
    ThermalResponse,
};
use crate::error::{Error, Result};
use crate::solver::{band_diagram, electric_field, field_at, interpolate, ConfocalSpot, SolverState};

/// Uniform frequency grid around a center frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralGrid {
    /// Center [THz].
    pub center: f64,
    /// Half-width [GHz].
    pub half_span: f64,
    pub points: usize,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self {
            center: crate::emitter::g_center_frequency_thz(),
            half_span: 300.0,
            points: 2048,
        }
    }
}

impl SpectralGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points < 8 || !(self.half_span > 0.0) || !(self.center > 0.0) {
            return Err(Error::config(
                "grid",
                "needs ≥ 8 points, positive span and center",
            ));
        }
        Ok(())
    }

    /// Detunings from the center [GHz].
    pub fn offsets_ghz(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| -self.half_span + 2.0 * self.half_span * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Absolute frequencies [THz].
    pub fn frequencies_thz(&self) -> Vec<f64> {
        self.offsets_ghz()
            .iter()
            .map(|d| self.center + d * 1e-3)
            .collect()
    }

    pub fn step_ghz(&self) -> f64 {
        2.0 * self.half_span / (self.points - 1) as f64
    }
}

/// Everything that maps local conditions to optical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalModels {
    pub charge_state: ChargeStateModel,
    pub thermal: ThermalModel,
    pub exciton: ExcitonModel,
    /// Stark tuning channel switch.
    pub stark_enabled: bool,
    /// Charge-state modulation channel switch.
    pub charge_state_enabled: bool,
    /// Fraction of the zero-bias peak below which a line is not detected.
    pub detection_floor: f64,
    pub grid: SpectralGrid,
}

impl Default for OpticalModels {
    fn default() -> Self {
        Self {
            charge_state: ChargeStateModel::default(),
            thermal: ThermalModel::default(),
            exciton: ExcitonModel::default(),
            stark_enabled: true,
            charge_state_enabled: true,
            detection_floor: 0.2,
            grid: SpectralGrid::default(),
        }
    }
}

impl OpticalModels {
    pub fn validate(&self) -> Result<()> {
        self.charge_state.validate()?;
        self.thermal.validate()?;
        self.exciton.validate()?;
        self.grid.validate()?;
        if !(0.0..1.0).contains(&self.detection_floor) {
            return Err(Error::config("optics.detection_floor", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Local field and bright fraction of every emitter at one bias.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterEnvironment {
    pub field: Vec<f64>,
    pub bright: Vec<f64>,
}

fn local_bands(state: &SolverState) -> impl Fn(f64) -> LocalBands + '_ {
    let x = state.positions();
    let b = band_diagram(state);
    // The p contact is the left boundary.
    let efp_contact = b.efp[0];
    move |pos| LocalBands {
        ei: interpolate(x, &b.ei, pos),
        efn: interpolate(x, &b.efn, pos),
        efp: interpolate(x, &b.efp, pos),
        efp_contact,
    }
}

/// Field [V/cm] and bright fraction at each emitter, relative to the
/// equilibrium state `reference`.
pub fn emitter_environment(
    state: &SolverState,
    reference: &SolverState,
    emitters: &[Emitter],
    models: &OpticalModels,
) -> EmitterEnvironment {
    let e = electric_field(state);
    let here = local_bands(state);
    let eq = local_bands(reference);
    let field = emitters
        .iter()
        .map(|em| field_at(state, &e, em.position))
        .collect();
    let bright = emitters
        .iter()
        .map(|em| {
            if models.charge_state_enabled {
                models
                    .charge_state
                    .bright_fraction(&here(em.position), &eq(em.position))
            } else {
                1.0
            }
        })
        .collect();
    EmitterEnvironment { field, bright }
}

/// Bright fraction on arbitrary lateral positions (no emitters needed).
pub fn bright_profile(
    state: &SolverState,
    reference: &SolverState,
    positions: &[f64],
    model: &ChargeStateModel,
) -> Vec<f64> {
    let here = local_bands(state);
    let eq = local_bands(reference);
    positions
        .iter()
        .map(|&x| model.bright_fraction(&here(x), &eq(x)))
        .collect()
}

/// One synthesized spectrum (unnormalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub intensity: Vec<f64>,
    /// Σ of emitter weights; the spectrally integrated intensity.
    pub total_weight: f64,
    /// Weighted mean line position relative to the grid center [GHz].
    pub first_moment: f64,
    /// No emitter contributes.
    pub empty: bool,
}

/// Spot weights below this are dropped.
const WEIGHT_CUTOFF: f64 = 1e-14;

/// Per-emitter weight and line parameters (center offset, FWHM) [GHz].
fn emitter_lines<'a>(
    emitters: &'a [Emitter],
    env: &'a EmitterEnvironment,
    spot: &'a ConfocalSpot,
    thermal: ThermalResponse,
    models: &'a OpticalModels,
) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    let center = models.grid.center;
    emitters.iter().enumerate().filter_map(move |(i, em)| {
        let s = spot.intensity_at(em.position);
        if s < WEIGHT_CUTOFF {
            return None;
        }
        let w = s * env.bright[i] * thermal.intensity_factor;
        let shift = if models.stark_enabled {
            stark_shift(em, env.field[i])
        } else {
            0.0
        };
        let nu = (em.zero_field_frequency - center) * 1e3 + shift - thermal.extra_redshift;
        Some((w, nu, em.homogeneous_linewidth + thermal.extra_linewidth))
    })
}

/// Spot-integrated intensity and first moment without building the spectrum.
pub fn integrated_response(
    emitters: &[Emitter],
    env: &EmitterEnvironment,
    spot: &ConfocalSpot,
    thermal: ThermalResponse,
    models: &OpticalModels,
) -> (f64, f64) {
    let (mut w, mut m) = (0.0, 0.0);
    for (wi, nu, _) in emitter_lines(emitters, env, spot, thermal, models) {
        w += wi;
        m += wi * nu;
    }
    (w, if w > 0.0 { m / w } else { 0.0 })
}

/// Sum of area-normalized Lorentzians, one per emitter, weighted by
/// bright fraction, spot overlap and thermal intensity factor.
pub fn synthesize_spectrum(
    spot: &ConfocalSpot,
    emitters: &[Emitter],
    env: &EmitterEnvironment,
    thermal: ThermalResponse,
    models: &OpticalModels,
) -> Spectrum {
    let grid = models.grid.offsets_ghz();
    let mut intensity = vec![0.0; grid.len()];
    let (mut total, mut moment) = (0.0, 0.0);
    let mut any = false;
    for (w, nu, gamma) in emitter_lines(emitters, env, spot, thermal, models) {
        any = true;
        if w == 0.0 {
            continue;
        }
        total += w;
        moment += w * nu;
        let hw = 0.5 * gamma;
        let a = w * hw / std::f64::consts::PI;
        for (out, f) in intensity.iter_mut().zip(&grid) {
            let d = f - nu;
            *out += a / (d * d + hw * hw);
        }
    }
    Spectrum {
        intensity,
        total_weight: total,
        first_moment: if total > 0.0 { moment / total } else { 0.0 },
        empty: !any || total == 0.0,
    }
}
