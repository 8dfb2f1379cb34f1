use serde::{Deserialize, Serialize};

use crate::constants::K_B_EV;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalModel {
    /// Junction-to-bath thermal resistance [K/W].
    pub thermal_resistance: f64,
    pub base_temperature: f64,
    /// Arrhenius activation of the nonradiative channel [meV].
    pub quench_activation: f64,
    pub quench_prefactor: f64,
    /// Homogeneous broadening per kelvin above base [GHz/K].
    pub linewidth_broadening_coefficient: f64,
    /// Line redshift per kelvin above base [GHz/K].
    pub redshift_coefficient: f64,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            thermal_resistance: 122.0,
            base_temperature: 6.0,
            quench_activation: 32.5,
            quench_prefactor: 205.8,
            linewidth_broadening_coefficient: 1.0,
            redshift_coefficient: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalResponse {
    pub intensity_factor: f64,
    /// Added FWHM [GHz].
    pub extra_linewidth: f64,
    /// Magnitude of the added redshift [GHz].
    pub extra_redshift: f64,
}

pub(crate) fn arrhenius_factor(temperature: f64, activation_mev: f64, prefactor: f64) -> f64 {
    let kt_mev = K_B_EV * 1e3 * temperature;
    1.0 / (1.0 + prefactor * (-activation_mev / kt_mev).exp())
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("thermal_resistance", self.thermal_resistance),
            ("quench_activation", self.quench_activation),
            ("quench_prefactor", self.quench_prefactor),
            ("linewidth_broadening_coefficient", self.linewidth_broadening_coefficient),
            ("redshift_coefficient", self.redshift_coefficient),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("thermal.{name}"), "must be ≥ 0"));
            }
        }
        if !(self.base_temperature > 0.0) {
            return Err(Error::config("thermal.base_temperature", "must be > 0"));
        }
        Ok(())
    }

    /// Intensity, broadening and redshift at temperature `t` [K]. Below the
    /// base temperature the linear terms are held at zero.
    pub fn thermal_quench(&self, t: f64) -> ThermalResponse {
        let dt = (t - self.base_temperature).max(0.0);
        ThermalResponse {
            intensity_factor: arrhenius_factor(t, self.quench_activation, self.quench_prefactor),
            extra_linewidth: self.linewidth_broadening_coefficient * dt,
            extra_redshift: self.redshift_coefficient * dt,
        }
    }

    /// Junction temperature for dissipated electrical power `p` [W].
    pub fn junction_temperature(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::InvalidInput(format!("power must be ≥ 0, got {p}")));
        }
        Ok(self.base_temperature + self.thermal_resistance * p)
    }
}

/// Silicon free-exciton line used as a thermometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitonModel {
    /// Line center [THz].
    pub center: f64,
    /// FWHM [GHz].
    pub linewidth: f64,
    pub quench_activation: f64,
    pub quench_prefactor: f64,
}

impl Default for ExcitonModel {
    fn default() -> Self {
        Self {
            // TO-phonon replica near 1130 nm
            center: 265.3,
            linewidth: 400.0,
            quench_activation: 14.7,
            quench_prefactor: 10.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitonResponse {
    /// Relative to the base-temperature intensity.
    pub intensity: f64,
    pub center: f64,
    pub linewidth: f64,
}

impl ExcitonModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center", self.center),
            ("linewidth", self.linewidth),
            ("quench_activation", self.quench_activation),
            ("quench_prefactor", self.quench_prefactor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("exciton.{name}"), "must be ≥ 0"));
            }
        }
        Ok(())
    }

    /// Response at temperature `t`; independent of field and band bending.
    pub fn exciton_response(&self, t: f64, base_temperature: f64) -> ExcitonResponse {
        let f = |t| arrhenius_factor(t, self.quench_activation, self.quench_prefactor);
        ExcitonResponse {
            intensity: f(t) / f(base_temperature),
            center: self.center,
            linewidth: self.linewidth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_temperature_is_unquenched() {
        let m = ThermalModel::default();
        let r = m.thermal_quench(m.base_temperature);
        assert!((r.intensity_factor - 1.0).abs() < 1e-12);
        assert_eq!(r.extra_linewidth, 0.0);
        assert_eq!(r.extra_redshift, 0.0);
    }

    #[test]
    fn junction_heating_law() {
        let m = ThermalModel::default();
        assert_eq!(m.junction_temperature(0.0).unwrap(), 6.0);
        assert!((m.junction_temperature(0.45).unwrap() - 6.0 - 54.9).abs() < 1e-9);
        assert!((m.junction_temperature(100e-6).unwrap() - 6.0 - 0.0122).abs() < 1e-9);
        assert!(m.junction_temperature(-1.0).is_err());
    }

    #[test]
    fn exciton_is_normalized() {
        let e = ExcitonModel::default();
        let r = e.exciton_response(6.0, 6.0);
        assert_eq!(r.intensity, 1.0);
        assert_eq!(r.center, e.center);
    }

    proptest! {
        #[test]
        fn quench_is_monotone(t in 6.0f64..300.0, dt in 0.01f64..50.0) {
            let m = ThermalModel::default();
            let (a, b) = (m.thermal_quench(t), m.thermal_quench(t + dt));
            prop_assert!(b.intensity_factor < a.intensity_factor);
            prop_assert!(b.extra_linewidth > a.extra_linewidth);
            prop_assert!(b.extra_redshift > a.extra_redshift);
        }
    }
}
