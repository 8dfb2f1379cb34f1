use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which quasi-Fermi level sets the defect occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FermiReference {
    /// Hole Fermi level of the p contact carried flat through the junction,
    /// as it is at cryogenic temperature where thermal generation vanishes.
    /// Band bending under reverse bias then lifts it toward the conduction
    /// band and ionizes the defect.
    #[default]
    ContactHole,
    /// Local hole quasi-Fermi level of the solver state.
    Hole,
    /// Local electron quasi-Fermi level of the solver state.
    Electron,
}

/// Logistic bright/dark occupation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeStateModel {
    /// Charge-transition level above mid-gap [eV].
    pub transition_level: f64,
    pub sigmoid_width: f64,
    pub dark_floor: f64,
    pub fermi_reference: FermiReference,
}

impl Default for ChargeStateModel {
    fn default() -> Self {
        Self {
            transition_level: 1.76,
            sigmoid_width: 0.8,
            dark_floor: 0.0,
            fermi_reference: FermiReference::ContactHole,
        }
    }
}

/// Local energies at an emitter [eV]: intrinsic level and quasi-Fermi levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBands {
    pub ei: f64,
    pub efn: f64,
    pub efp: f64,
    /// Hole Fermi level at the p contact.
    pub efp_contact: f64,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ChargeStateModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigmoid_width > 0.0) {
            return Err(Error::config("charge_state.sigmoid_width", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.dark_floor) {
            return Err(Error::config("charge_state.dark_floor", "must lie in [0, 1)"));
        }
        if !self.transition_level.is_finite() {
            return Err(Error::config("charge_state.transition_level", "must be finite"));
        }
        Ok(())
    }

    fn occupation(&self, b: &LocalBands) -> f64 {
        let ef = match self.fermi_reference {
            FermiReference::Hole => b.efp,
            FermiReference::Electron => b.efn,
            FermiReference::ContactHole => b.efp_contact,
        };
        logistic((self.transition_level - (ef - b.ei)) / self.sigmoid_width)
    }

    /// Bright-state probability, normalized so that the same position at
    /// thermal equilibrium (`reference`) gives exactly 1.
    pub fn bright_fraction(&self, local: &LocalBands, reference: &LocalBands) -> f64 {
        let s = self.occupation(local);
        let s0 = self.occupation(reference);
        let rel = if s0 > 0.0 { (s / s0).min(1.0) } else { 1.0 };
        self.dark_floor + (1.0 - self.dark_floor) * rel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EQ: LocalBands = LocalBands {
        ei: 0.0,
        efn: -0.24,
        efp: -0.24,
        efp_contact: -0.24,
    };

    #[test]
    fn equilibrium_is_fully_bright() {
        let m = ChargeStateModel::default();
        assert_eq!(m.bright_fraction(&EQ, &EQ), 1.0);
    }

    #[test]
    fn strong_bending_darkens_hole_reference() {
        let m = ChargeStateModel::default();
        let bent = LocalBands {
            ei: -10.0,
            efn: 0.0,
            efp: 0.0,
            efp_contact: 0.0,
        };
        assert!(m.bright_fraction(&bent, &EQ) < 1e-4);
        let floor = ChargeStateModel {
            dark_floor: 0.1,
            ..m
        };
        assert!((floor.bright_fraction(&bent, &EQ) - 0.1).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn fraction_stays_in_range(ei in -50.0f64..50.0, efp in -50.0f64..50.0, floor in 0.0f64..0.99) {
            let m = ChargeStateModel { dark_floor: floor, ..ChargeStateModel::default() };
            let b = LocalBands { ei, efn: efp, efp, efp_contact: efp };
            let f = m.bright_fraction(&b, &EQ);
            prop_assert!(f >= floor - 1e-12 && f <= 1.0);
        }

        #[test]
        fn more_bending_is_never_brighter(b1 in 0.0f64..20.0, extra in 0.0f64..20.0) {
            let m = ChargeStateModel::default();
            let at = |bend: f64| LocalBands { ei: -bend, efn: -0.24, efp: -0.24, efp_contact: -0.24 };
            prop_assert!(m.bright_fraction(&at(b1 + extra), &EQ) <= m.bright_fraction(&at(b1), &EQ));
        }
    }
}
