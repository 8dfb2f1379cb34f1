use serde::{Deserialize, Serialize};

use super::implant::{ImplantStep, Interval, IonSpecies, Polarity, RangeTable};
use crate::error::{Error, Result};

/// Full description of the lateral diode.
///
/// Device coordinates run from 0 at the outer edge of the acceptor aperture
/// to `device_length` at the outer edge of the donor aperture. The ohmic
/// contacts sit at the aperture centers, so the simulated span is the
/// contact-to-contact distance `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSpec {
    /// Spacing between the p⁺ and n⁺ apertures [µm].
    pub gap_d: f64,
    pub device_length: f64,
    pub readout_depth_nm: f64,
    pub film_thickness_nm: f64,
    /// Substrate resistivity [Ω·cm]; the substrate is boron doped.
    pub substrate_resistivity: f64,
    pub substrate_dopant_polarity: Polarity,
    pub implants: Vec<ImplantStep>,
    /// Temperature used by the electrical model [K].
    pub temperature: f64,
    pub relative_permittivity: f64,
    /// Fraction of the nominal dopant density treated as ionized.
    pub effective_ionization_fraction: f64,
    /// 1σ width of the error-function roll-off at aperture edges [µm].
    pub lateral_straggle_um: f64,
    /// Transverse width used to scale 1D current densities to amperes [µm].
    pub device_width_um: f64,
    pub range_table: RangeTable,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self::lateral(103.0, 500.0, 50.0)
    }
}

impl DeviceSpec {
    /// Default recipe with a given gap, doped-aperture size and hydrogen
    /// window size [µm]. Carbon is blanket-implanted, hydrogen goes through
    /// a window centered in the gap.
    pub fn lateral(gap_d: f64, aperture: f64, ensemble_window: f64) -> Self {
        let p_ap = Interval::new(0.0, aperture);
        let n_ap = Interval::new(aperture + gap_d, 2.0 * aperture + gap_d);
        let length = n_ap.end;
        let gap_center = aperture + 0.5 * gap_d;
        let h_ap = Interval::new(
            gap_center - 0.5 * ensemble_window,
            gap_center + 0.5 * ensemble_window,
        );
        Self {
            gap_d,
            device_length: length,
            readout_depth_nm: 110.0,
            film_thickness_nm: 220.0,
            substrate_resistivity: 10.0,
            substrate_dopant_polarity: Polarity::Acceptor,
            implants: vec![
                ImplantStep {
                    species: IonSpecies::Carbon,
                    energy_kev: 38.0,
                    dose_cm2: 7e13,
                    aperture: Interval::new(0.0, length),
                    polarity: Polarity::Neutral,
                },
                ImplantStep {
                    species: IonSpecies::Boron,
                    energy_kev: 29.0,
                    dose_cm2: 1e14,
                    aperture: p_ap,
                    polarity: Polarity::Acceptor,
                },
                ImplantStep {
                    species: IonSpecies::Phosphorus,
                    energy_kev: 80.0,
                    dose_cm2: 1e14,
                    aperture: n_ap,
                    polarity: Polarity::Donor,
                },
                ImplantStep {
                    species: IonSpecies::Hydrogen,
                    energy_kev: 9.0,
                    dose_cm2: 7e13,
                    aperture: h_ap,
                    polarity: Polarity::Neutral,
                },
            ],
            temperature: 300.0,
            relative_permittivity: 11.7,
            effective_ionization_fraction: 0.0765,
            lateral_straggle_um: 0.2,
            device_width_um: 500.0,
            range_table: RangeTable::builtin(),
        }
    }

    fn aperture_of(&self, polarity: Polarity) -> Option<Interval> {
        self.implants
            .iter()
            .filter(|s| s.polarity == polarity && s.dose_cm2 > 0.0)
            .map(|s| s.aperture)
            .reduce(|a, b| Interval::new(a.start.min(b.start), a.end.max(b.end)))
    }

    pub fn acceptor_aperture(&self) -> Option<Interval> {
        self.aperture_of(Polarity::Acceptor)
    }

    pub fn donor_aperture(&self) -> Option<Interval> {
        self.aperture_of(Polarity::Donor)
    }

    /// Hydrogen window that hosts the emitter ensemble.
    pub fn ensemble_window(&self) -> Option<Interval> {
        self.implants
            .iter()
            .find(|s| s.species == IonSpecies::Hydrogen)
            .map(|s| s.aperture)
    }

    /// Lateral interval actually simulated: contact center to contact center.
    /// Falls back to the whole device when an aperture is missing.
    pub fn simulation_domain(&self) -> Interval {
        let start = self.acceptor_aperture().map_or(0.0, |a| a.center());
        let end = self
            .donor_aperture()
            .map_or(self.device_length, |a| a.center());
        Interval::new(start, end)
    }

    /// Contact spacing `d` [µm].
    pub fn contact_spacing(&self) -> f64 {
        self.simulation_domain().width()
    }

    /// Conduction cross-section for 1D → ampere scaling [cm²].
    pub fn cross_section_cm2(&self) -> f64 {
        self.film_thickness_nm * 1e-7 * self.device_width_um * 1e-4
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(path, format!("must be positive and finite, got {v}")))
            }
        };
        pos("device.gap_d", self.gap_d)?;
        pos("device.device_length", self.device_length)?;
        pos("device.readout_depth_nm", self.readout_depth_nm)?;
        pos("device.film_thickness_nm", self.film_thickness_nm)?;
        pos("device.temperature", self.temperature)?;
        pos("device.relative_permittivity", self.relative_permittivity)?;
        pos("device.device_width_um", self.device_width_um)?;
        if !(self.lateral_straggle_um >= 0.0) {
            return Err(Error::config("device.lateral_straggle_um", "must be nonnegative"));
        }
        if !(self.substrate_resistivity > 0.0) {
            return Err(Error::config("device.substrate_resistivity", "must be positive"));
        }
        if self.substrate_dopant_polarity != Polarity::Acceptor {
            return Err(Error::config(
                "device.substrate_dopant_polarity",
                "only acceptor (boron-doped) substrates are supported",
            ));
        }
        if self.readout_depth_nm >= self.film_thickness_nm {
            return Err(Error::config(
                "device.readout_depth_nm",
                format!(
                    "readout depth {} nm must lie inside the {} nm film",
                    self.readout_depth_nm, self.film_thickness_nm
                ),
            ));
        }
        let f = self.effective_ionization_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::config(
                "device.effective_ionization_fraction",
                format!("must lie in (0, 1], got {f}"),
            ));
        }
        let extent = Interval::new(0.0, self.device_length);
        for (i, s) in self.implants.iter().enumerate() {
            let path = format!("device.implants[{i}]");
            if !(s.dose_cm2 >= 0.0) {
                return Err(Error::config(format!("{path}.dose_cm2"), "must be nonnegative"));
            }
            if !(s.aperture.width() > 0.0) || !extent.contains_interval(&s.aperture) {
                return Err(Error::config(
                    format!("{path}.aperture"),
                    format!(
                        "[{}, {}] must be a nonempty interval inside [0, {}]",
                        s.aperture.start, s.aperture.end, self.device_length
                    ),
                ));
            }
            if let Err(e) = self.range_table.lookup(s.species, s.energy_kev) {
                return Err(Error::config(format!("{path}.energy_kev"), e.to_string()));
            }
        }
        if let (Some(p), Some(n)) = (self.acceptor_aperture(), self.donor_aperture()) {
            if p.center() >= n.center() {
                return Err(Error::config(
                    "device.implants",
                    "acceptor aperture must lie left of the donor aperture",
                ));
            }
            if let Some(h) = self.ensemble_window() {
                let gap = Interval::new(p.end, n.start);
                if !gap.contains_interval(&h) {
                    return Err(Error::config(
                        "device.implants",
                        format!(
                            "hydrogen window [{}, {}] must lie inside the gap [{}, {}]",
                            h.start, h.end, gap.start, gap.end
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_device_geometry() {
        let d = DeviceSpec::default();
        d.validate().unwrap();
        assert_eq!(d.contact_spacing(), 603.0);
        let h = d.ensemble_window().unwrap();
        assert_eq!((h.start, h.end), (526.5, 576.5));
        assert_eq!(d.simulation_domain(), Interval::new(250.0, 853.0));
    }

    #[test]
    fn validation_reports_field_paths() {
        let d = DeviceSpec { readout_depth_nm: 300.0, ..DeviceSpec::default() };
        assert!(d.validate().unwrap_err().to_string().starts_with("device.readout_depth_nm"));

        let d = DeviceSpec { effective_ionization_fraction: 0.0, ..DeviceSpec::default() };
        assert!(d
            .validate()
            .unwrap_err()
            .to_string()
            .contains("effective_ionization_fraction"));

        let mut d = DeviceSpec::default();
        d.implants[3].aperture = Interval::new(400.0, 450.0);
        assert!(d.validate().unwrap_err().to_string().contains("hydrogen window"));

        let mut d = DeviceSpec::default();
        d.implants[1].energy_kev = 31.0;
        assert!(d.validate().unwrap_err().to_string().contains("implants[1].energy_kev"));
    }
}
