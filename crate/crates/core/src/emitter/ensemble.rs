use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{wavelength_to_ghz, G_CENTER_WAVELENGTH_UM};
use crate::device::Interval;
use crate::error::{Error, Result};

/// Zero-phonon line of the G center [THz].
pub fn g_center_frequency_thz() -> f64 {
    wavelength_to_ghz(G_CENTER_WAVELENGTH_UM) * 1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    /// Lateral position [µm].
    pub position: f64,
    /// Dipole orientation [deg].
    pub dipole_angle: f64,
    pub zero_field_frequency: f64,
    /// FWHM [GHz].
    pub homogeneous_linewidth: f64,
    /// Linear Stark coefficient [GHz per V/cm], signed.
    pub stark_coefficient: f64,
}

/// Two-component Gaussian mixture over dipole angles [deg].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleMixture {
    pub means: [f64; 2],
    pub weights: [f64; 2],
    pub spreads: [f64; 2],
}

impl Default for AngleMixture {
    fn default() -> Self {
        Self {
            means: [20.0, 100.0],
            weights: [0.5, 0.5],
            spreads: [10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Lateral window holding the emitters [µm].
    pub aperture: Interval,
    pub emitter_count: usize,
    /// 1σ spread of zero-field frequencies [GHz].
    pub inhomogeneous_sigma: f64,
    /// Homogeneous FWHM of each emitter [GHz].
    pub homogeneous_linewidth: f64,
    pub dipole_angle_mixture: AngleMixture,
    /// Stark coefficient magnitude [GHz per V/cm].
    pub differential_dipole_scale: f64,
    /// Direction the lateral field makes with the angle reference [deg];
    /// the projection is cos(angle − field_axis).
    pub field_axis_deg: f64,
    /// Center of the zero-field distribution [THz].
    pub center_frequency: f64,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            aperture: Interval::new(526.5, 576.5),
            emitter_count: 20_000,
            inhomogeneous_sigma: 15.0,
            homogeneous_linewidth: 10.0,
            dipole_angle_mixture: AngleMixture::default(),
            differential_dipole_scale: 0.0,
            field_axis_deg: 45.0,
            center_frequency: g_center_frequency_thz(),
            seed: 42,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let mix = &self.dipole_angle_mixture;
        if self.emitter_count == 0 {
            return Err(Error::config("ensemble.emitter_count", "must be at least 1"));
        }
        if !(self.aperture.width() > 0.0) {
            return Err(Error::config("ensemble.aperture", "must have positive width"));
        }
        if ((mix.weights[0] + mix.weights[1]) - 1.0).abs() > 1e-9
            || mix.weights.iter().any(|w| *w < 0.0)
        {
            return Err(Error::config(
                "ensemble.dipole_angle_mixture.weights",
                format!("must be nonnegative and sum to 1, got {:?}", mix.weights),
            ));
        }
        if mix.spreads.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::config(
                "ensemble.dipole_angle_mixture.spreads",
                "must be nonnegative",
            ));
        }
        for (name, v) in [
            ("inhomogeneous_sigma", self.inhomogeneous_sigma),
            ("differential_dipole_scale", self.differential_dipole_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("ensemble.{name}"), "must be ≥ 0"));
            }
        }
        if !(self.homogeneous_linewidth > 0.0) {
            return Err(Error::config("ensemble.homogeneous_linewidth", "must be > 0"));
        }
        Ok(())
    }

    pub fn stark_coefficient(&self, angle_deg: f64) -> f64 {
        self.differential_dipole_scale * (angle_deg - self.field_axis_deg).to_radians().cos()
    }
}

/// Seeded draw of the ensemble.
pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<Vec<Emitter>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mix = &spec.dipole_angle_mixture;
    let comps = [
        Normal::new(mix.means[0], mix.spreads[0]).map_err(|e| Error::InvalidInput(e.to_string()))?,
        Normal::new(mix.means[1], mix.spreads[1]).map_err(|e| Error::InvalidInput(e.to_string()))?,
    ];
    let lines = Normal::new(0.0, spec.inhomogeneous_sigma)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let ap = spec.aperture;
    Ok((0..spec.emitter_count)
        .map(|_| {
            let position = ap.start + ap.width() * rng.random::<f64>();
            let k = usize::from(rng.random::<f64>() >= mix.weights[0]);
            let dipole_angle = comps[k].sample(&mut rng);
            let detuning = lines.sample(&mut rng);
            Emitter {
                position,
                dipole_angle,
                zero_field_frequency: spec.center_frequency + detuning * 1e-3,
                homogeneous_linewidth: spec.homogeneous_linewidth,
                stark_coefficient: spec.stark_coefficient(dipole_angle),
            }
        })
        .collect())
}

/// Linear, redshift-only Stark shift [GHz] for a local field [V/cm].
pub fn stark_shift(emitter: &Emitter, local_field: f64) -> f64 {
    -(emitter.stark_coefficient * local_field).abs()
}

/// Ensemble dump with columns index, x_um, angle_deg, nu0_THz, gamma_GHz,
/// stark_GHzVcm.
pub fn ensemble_csv(emitters: &[Emitter]) -> String {
    use crate::solver::fmt9;
    use std::fmt::Write as _;
    let mut out = String::from("index,x_um,angle_deg,nu0_THz,gamma_GHz,stark_GHzVcm\n");
    for (i, e) in emitters.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{}",
            fmt9(e.position),
            fmt9(e.dipole_angle),
            fmt9(e.zero_field_frequency),
            fmt9(e.homogeneous_linewidth),
            fmt9(e.stark_coefficient)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_ensemble() {
        let spec = EnsembleSpec {
            emitter_count: 500,
            differential_dipole_scale: 1e-3,
            ..EnsembleSpec::default()
        };
        let a = sample_ensemble(&spec).unwrap();
        let b = sample_ensemble(&spec).unwrap();
        assert_eq!(ensemble_csv(&a), ensemble_csv(&b));
        let c = sample_ensemble(&EnsembleSpec { seed: 7, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn emitters_stay_in_window() {
        let spec = EnsembleSpec::default();
        for e in sample_ensemble(&spec).unwrap() {
            assert!(spec.aperture.contains(e.position));
            assert!(e.homogeneous_linewidth > 0.0);
        }
    }

    #[test]
    fn zero_field_center_near_234_6_thz() {
        let nu = g_center_frequency_thz();
        assert!((nu - 234.58).abs() < 0.01, "{nu}");
    }

    #[test]
    fn stark_shift_is_red_and_linear() {
        let e = Emitter {
            position: 0.0,
            dipole_angle: 20.0,
            zero_field_frequency: 234.6,
            homogeneous_linewidth: 10.0,
            stark_coefficient: -2e-3,
        };
        assert_eq!(stark_shift(&e, 0.0), 0.0);
        let a = stark_shift(&e, 1e4);
        assert!(a < 0.0);
        assert!((stark_shift(&e, 2e4) - 2.0 * a).abs() < 1e-12);
        assert_eq!(stark_shift(&e, -1e4), a);
    }

    #[test]
    fn bad_mixture_weights_are_rejected() {
        let mut spec = EnsembleSpec::default();
        spec.dipole_angle_mixture.weights = [0.7, 0.7];
        let err = sample_ensemble(&spec).unwrap_err().to_string();
        assert!(err.contains("weights"), "{err}");
    }
}
