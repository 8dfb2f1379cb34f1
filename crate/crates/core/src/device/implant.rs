use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::CM_PER_NM;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IonSpecies {
    Boron,
    Phosphorus,
    Carbon,
    Hydrogen,
}

impl fmt::Display for IonSpecies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IonSpecies::Boron => "boron",
            IonSpecies::Phosphorus => "phosphorus",
            IonSpecies::Carbon => "carbon",
            IonSpecies::Hydrogen => "hydrogen",
        };
        f.write_str(s)
    }
}

impl FromStr for IonSpecies {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boron" | "b" => Ok(IonSpecies::Boron),
            "phosphorus" | "p" => Ok(IonSpecies::Phosphorus),
            "carbon" | "c" => Ok(IonSpecies::Carbon),
            "hydrogen" | "h" => Ok(IonSpecies::Hydrogen),
            other => Err(Error::InvalidInput(format!("unknown ion species '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Acceptor,
    Donor,
    Neutral,
}

/// Closed lateral interval in device coordinates [µm].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.start >= self.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEntry {
    pub species: IonSpecies,
    pub energy_kev: f64,
    pub projected_range_nm: f64,
    pub straggle_nm: f64,
}

/// Projected range / straggle lookup, keyed by species and implant energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeTable {
    entries: Vec<RangeEntry>,
}

const ENERGY_MATCH_KEV: f64 = 1e-6;

impl RangeTable {
    pub fn new(entries: Vec<RangeEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.energy_kev > 0.0 && e.projected_range_nm > 0.0 && e.straggle_nm > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "range entry {i} ({} at {} keV) must have positive energy, range and straggle",
                    e.species, e.energy_kev
                )));
            }
            let duplicate = entries[..i].iter().any(|o| {
                o.species == e.species && (o.energy_kev - e.energy_kev).abs() < ENERGY_MATCH_KEV
            });
            if duplicate {
                return Err(Error::InvalidInput(format!(
                    "duplicate range entry for {} at {} keV",
                    e.species, e.energy_kev
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The table shipped with the crate, covering the default implant recipe.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/range_table.txt"))
            .expect("builtin range table is well formed")
    }

    pub fn entries(&self) -> &[RangeEntry] {
        &self.entries
    }

    pub fn lookup(&self, species: IonSpecies, energy_kev: f64) -> Result<&RangeEntry> {
        self.entries
            .iter()
            .find(|e| e.species == species && (e.energy_kev - energy_kev).abs() < ENERGY_MATCH_KEV)
            .ok_or(Error::MissingRange {
                species: species.to_string(),
                energy_kev,
            })
    }

    /// Parses the plain-text table: a header row followed by
    /// `species energy_keV Rp_nm straggle_nm` rows. Commas or whitespace
    /// separate columns; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_err = |line: usize, message: String| Error::Parse {
            what: format!("range table line {line}"),
            message,
        };

        let (hline, header) = rows
            .next()
            .ok_or_else(|| parse_err(0, "empty table".into()))?;
        let cols: Vec<String> = split_cols(header).map(|c| c.to_ascii_lowercase()).collect();
        let expected = ["species", "energy_kev", "rp_nm", "straggle_nm"];
        if cols != expected {
            return Err(parse_err(
                hline,
                format!("header must be `species energy_keV Rp_nm straggle_nm`, got {cols:?}"),
            ));
        }

        let mut entries = Vec::new();
        for (line, row) in rows {
            let cols: Vec<&str> = split_cols(row).collect();
            if cols.len() != 4 {
                return Err(parse_err(line, format!("expected 4 columns, got {}", cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(line, format!("'{s}': {e}")))
            };
            entries.push(RangeEntry {
                species: cols[0].parse().map_err(|e: Error| parse_err(line, e.to_string()))?,
                energy_kev: num(cols[1])?,
                projected_range_nm: num(cols[2])?,
                straggle_nm: num(cols[3])?,
            });
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn split_cols(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|c| !c.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplantStep {
    pub species: IonSpecies,
    pub energy_kev: f64,
    /// Areal dose [cm⁻²].
    pub dose_cm2: f64,
    pub aperture: Interval,
    pub polarity: Polarity,
}

/// Gaussian depth profile of one implant, evaluated at `depth_nm` [cm⁻³].
pub fn implant_depth_profile(step: &ImplantStep, table: &RangeTable, depth_nm: f64) -> Result<f64> {
    let entry = table.lookup(step.species, step.energy_kev)?;
    Ok(gaussian_depth(step.dose_cm2, entry, depth_nm))
}

pub(crate) fn gaussian_depth(dose_cm2: f64, entry: &RangeEntry, depth_nm: f64) -> f64 {
    let sigma_cm = entry.straggle_nm * CM_PER_NM;
    let z = (depth_nm - entry.projected_range_nm) / entry.straggle_nm;
    dose_cm2 / ((2.0 * std::f64::consts::PI).sqrt() * sigma_cm) * (-0.5 * z * z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(species: IonSpecies, energy: f64, dose: f64) -> ImplantStep {
        ImplantStep {
            species,
            energy_kev: energy,
            dose_cm2: dose,
            aperture: Interval::new(0.0, 1.0),
            polarity: Polarity::Neutral,
        }
    }

    #[test]
    fn builtin_table_has_every_species_once() {
        let t = RangeTable::builtin();
        for s in [
            IonSpecies::Boron,
            IonSpecies::Phosphorus,
            IonSpecies::Carbon,
            IonSpecies::Hydrogen,
        ] {
            assert_eq!(t.entries().iter().filter(|e| e.species == s).count(), 1);
        }
    }

    #[test]
    fn zero_dose_gives_zero_everywhere() {
        let t = RangeTable::builtin();
        for depth in [0.0, 50.0, 110.0, 219.0] {
            let v = implant_depth_profile(&step(IonSpecies::Boron, 29.0, 0.0), &t, depth).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn boron_peak_is_1e19() {
        let t = RangeTable::builtin();
        let v = implant_depth_profile(&step(IonSpecies::Boron, 29.0, 1e14), &t, 110.0).unwrap();
        // closed form dose / (sqrt(2 pi) * 40 nm)
        let expected = 1e14 / (2.0 * std::f64::consts::PI).sqrt() / 40e-7;
        assert!((v / expected - 1.0).abs() < 1e-12);
        assert!((v / 1e19 - 1.0).abs() < 0.01);
    }

    #[test]
    fn hydrogen_peak_is_5_6e18() {
        let t = RangeTable::builtin();
        let v = implant_depth_profile(&step(IonSpecies::Hydrogen, 9.0, 7e13), &t, 110.0).unwrap();
        assert!((v / 5.585e18 - 1.0).abs() < 1e-3, "{v:e}");
    }

    #[test]
    fn missing_entry_names_species_and_energy() {
        let t = RangeTable::builtin();
        let err = implant_depth_profile(&step(IonSpecies::Boron, 30.0, 1e14), &t, 110.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("boron") && msg.contains("30"), "{msg}");
    }

    #[test]
    fn parse_rejects_bad_header_and_nonpositive_values() {
        assert!(RangeTable::parse("a b c d\nboron 1 2 3").is_err());
        assert!(RangeTable::parse("species energy_keV Rp_nm straggle_nm\nboron 29 -1 3").is_err());
        let t = RangeTable::parse("species,energy_keV,Rp_nm,straggle_nm\nboron,29,110,40\n").unwrap();
        assert_eq!(t.entries().len(), 1);
    }

    #[test]
    fn quadrature_recovers_dose() {
        let t = RangeTable::builtin();
        for (s, e) in [(IonSpecies::Boron, 29.0), (IonSpecies::Hydrogen, 9.0)] {
            let st = step(s, e, 3e13);
            // Simpson over ±10 straggle around the peak, depth in nm → cm.
            let entry = t.lookup(s, e).unwrap();
            let (a, b) = (
                entry.projected_range_nm - 10.0 * entry.straggle_nm,
                entry.projected_range_nm + 10.0 * entry.straggle_nm,
            );
            let n = 4000;
            let h = (b - a) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * implant_depth_profile(&st, &t, a + i as f64 * h).unwrap();
            }
            let integral = acc * h / 3.0 * CM_PER_NM;
            assert!((integral / 3e13 - 1.0).abs() < 1e-3, "{integral:e}");
        }
    }
}
