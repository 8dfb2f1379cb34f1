use serde::{Deserialize, Serialize};

use crate::constants::{thermal_voltage, EPS0, K_B_EV, Q};
use crate::error::{Error, Result};

/// Silicon transport and band parameters at one simulation temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Intrinsic carrier density [cm⁻³].
    pub intrinsic_density: f64,
    /// Bandgap [eV].
    pub bandgap: f64,
    pub nc: f64,
    pub nv: f64,
    /// Electron mobility [cm²/(V·s)].
    pub mu_n: f64,
    pub mu_p: f64,
    pub relative_permittivity: f64,
    pub temperature: f64,
    /// SRH lifetimes [s].
    pub tau_n: f64,
    pub tau_p: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::silicon(300.0)
    }
}

impl MaterialParams {
    /// Standard silicon values with `ni` made consistent with Nc, Nv and Eg.
    ///
    /// Lifetimes default to 0.5 ns, representative of an implant-damaged
    /// thin film rather than bulk device-grade silicon.
    pub fn silicon(temperature: f64) -> Self {
        let mut m = Self {
            intrinsic_density: 0.0,
            bandgap: 1.124,
            nc: 2.86e19,
            nv: 3.10e19,
            mu_n: 1400.0,
            mu_p: 450.0,
            relative_permittivity: 11.7,
            temperature,
            tau_n: 5e-10,
            tau_p: 5e-10,
        };
        m.intrinsic_density = m.intrinsic_from_bands();
        m
    }

    pub fn with_lifetime(mut self, tau: f64) -> Self {
        self.tau_n = tau;
        self.tau_p = tau;
        self
    }

    /// √(Nc·Nv)·exp(−Eg/2kT).
    pub fn intrinsic_from_bands(&self) -> f64 {
        (self.nc * self.nv).sqrt() * (-self.bandgap / (2.0 * K_B_EV * self.temperature)).exp()
    }

    pub fn thermal_voltage(&self) -> f64 {
        thermal_voltage(self.temperature)
    }

    /// Permittivity [F/cm].
    pub fn permittivity(&self) -> f64 {
        self.relative_permittivity * EPS0
    }

    /// Debye length [cm] at carrier density `density` [cm⁻³].
    pub fn debye_length(&self, density: f64) -> f64 {
        (self.permittivity() * self.thermal_voltage() / (Q * density)).sqrt()
    }

    /// Intrinsic Debye length [cm], the internal length unit of the solver.
    pub fn intrinsic_debye_length(&self) -> f64 {
        self.debye_length(self.intrinsic_density)
    }

    pub fn diffusivity_n(&self) -> f64 {
        self.mu_n * self.thermal_voltage()
    }

    pub fn diffusivity_p(&self) -> f64 {
        self.mu_p * self.thermal_voltage()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("intrinsic_density", self.intrinsic_density),
            ("bandgap", self.bandgap),
            ("nc", self.nc),
            ("nv", self.nv),
            ("mu_n", self.mu_n),
            ("mu_p", self.mu_p),
            ("relative_permittivity", self.relative_permittivity),
            ("temperature", self.temperature),
            ("tau_n", self.tau_n),
            ("tau_p", self.tau_p),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("material.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        let ni2 = self.intrinsic_from_bands().powi(2);
        let rel = (self.intrinsic_density.powi(2) / ni2 - 1.0).abs();
        if rel > 0.01 {
            return Err(Error::config(
                "material.intrinsic_density",
                format!(
                    "ni² differs from Nc·Nv·exp(−Eg/kT) by {:.2}% (limit 1%)",
                    rel * 100.0
                ),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silicon_defaults_are_self_consistent() {
        let m = MaterialParams::default();
        m.validate().unwrap();
        assert!(m.intrinsic_density > 1.0e10 && m.intrinsic_density < 1.1e10);
        let ld = m.intrinsic_debye_length();
        assert!(ld > 3.5e-3 && ld < 4.5e-3, "{ld}");
    }

    #[test]
    fn inconsistent_ni_is_rejected() {
        let mut m = MaterialParams::default();
        m.intrinsic_density *= 1.02;
        let err = m.validate().unwrap_err().to_string();
        assert!(err.starts_with("material.intrinsic_density"), "{err}");
        m = MaterialParams::default();
        m.tau_p = 0.0;
        assert!(m.validate().is_err());
    }
}
