//! Physical constants in the mixed cm/µm unit system used across the crate.

/// Elementary charge [C].
pub const Q: f64 = 1.602_176_634e-19;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;
/// Boltzmann constant [eV/K].
pub const K_B_EV: f64 = 8.617_333_262e-5;
/// Vacuum permittivity [F/cm].
pub const EPS0: f64 = 8.854_187_812_8e-14;
/// Planck constant [J·s].
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light [µm·GHz], so that ν[GHz] = C_UM_GHZ / λ[µm].
pub const C_UM_GHZ: f64 = 299_792.458;
/// Speed of light [m/s].
pub const C_M_S: f64 = 299_792_458.0;

/// Centimetres per micrometre.
pub const CM_PER_UM: f64 = 1e-4;
/// Centimetres per nanometre.
pub const CM_PER_NM: f64 = 1e-7;

/// G-center zero-phonon-line wavelength [µm].
pub const G_CENTER_WAVELENGTH_UM: f64 = 1.278;

/// Thermal voltage kT/q [V].
pub fn thermal_voltage(temperature: f64) -> f64 {
    K_B * temperature / Q
}

/// Optical frequency [GHz] of a vacuum wavelength given in µm.
pub fn wavelength_to_ghz(lambda_um: f64) -> f64 {
    C_UM_GHZ / lambda_um
}

/// Photon energy [J] at a vacuum wavelength given in nm.
pub fn photon_energy_j(lambda_nm: f64) -> f64 {
    H_PLANCK * C_M_S / (lambda_nm * 1e-9)
}
