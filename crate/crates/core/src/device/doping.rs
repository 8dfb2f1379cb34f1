use serde::{Deserialize, Serialize};

use super::implant::{gaussian_depth, Interval, Polarity};
use super::spec::DeviceSpec;
use crate::constants::Q;
use crate::error::{Error, Result};

/// Name of the hole-mobility fit used for resistivity conversion; recorded in
/// run manifests.
pub const HOLE_MOBILITY_FIT: &str =
    "Caughey-Thomas holes, 300 K: mu_min=44.9, mu_max=470.5 cm2/Vs, N_ref=2.23e17 cm-3, alpha=0.719";

/// Doping-dependent hole mobility [cm²/(V·s)] at 300 K.
pub fn hole_mobility_caughey_thomas(acceptors: f64) -> f64 {
    const MU_MIN: f64 = 44.9;
    const MU_MAX: f64 = 470.5;
    const N_REF: f64 = 2.23e17;
    const ALPHA: f64 = 0.719;
    MU_MIN + (MU_MAX - MU_MIN) / (1.0 + (acceptors / N_REF).powf(ALPHA))
}

/// Acceptor density [cm⁻³] of p-type silicon with resistivity `rho` [Ω·cm],
/// solving q·μp(Na)·Na = 1/ρ.
pub fn resistivity_to_acceptor_density(rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!(
            "resistivity must be positive, got {rho}"
        )));
    }
    if rho.is_infinite() {
        return Ok(0.0);
    }
    let target = 1.0 / rho;
    // σ(Na) = q μ(Na) Na is strictly increasing; bisect in log space.
    let sigma = |log_na: f64| {
        let na = 10f64.powf(log_na);
        Q * hole_mobility_caughey_thomas(na) * na
    };
    let (mut lo, mut hi) = (0.0_f64, 22.0_f64);
    if sigma(lo) > target {
        // below 1 cm⁻³ mobility is flat at μ_max
        return Ok(target / (Q * 470.5));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sigma(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(10f64.powf(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DopingWarning {
    /// p⁺ and n⁺ apertures overlap; short junctions degrade.
    ApertureOverlap { acceptor: Interval, donor: Interval },
}

/// Net ionized doping along the lateral cut, donor-positive [cm⁻³].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopingProfile {
    pub positions: Vec<f64>,
    pub net_doping: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<DopingWarning>,
}

impl DopingProfile {
    pub fn new(positions: Vec<f64>, net_doping: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != net_doping.len() {
            return Err(Error::InvalidInput(format!(
                "doping profile needs matching nonempty arrays ({} positions, {} values)",
                positions.len(),
                net_doping.len()
            )));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "profile positions must be strictly increasing".into(),
            ));
        }
        if net_doping.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("net doping must be finite".into()));
        }
        Ok(Self {
            positions,
            net_doping,
            warnings: Vec::new(),
        })
    }

    /// Piecewise-constant two-region profile sampled on a uniform grid, with the
    /// step at `junction`. Used for abrupt reference junctions.
    pub fn abrupt(
        start: f64,
        end: f64,
        junction: f64,
        left: f64,
        right: f64,
        spacing: f64,
    ) -> Result<Self> {
        let n = ((end - start) / spacing).round().max(2.0) as usize;
        let positions: Vec<f64> = (0..=n)
            .map(|i| start + (end - start) * i as f64 / n as f64)
            .collect();
        let values = positions
            .iter()
            .map(|&x| if x < junction { left } else { right })
            .collect();
        Self::new(positions, values)
    }

    pub fn uniform(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![value, value])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.positions[0]
    }

    pub fn end(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    /// Linear interpolation, clamped outside the sampled range.
    pub fn at(&self, x: f64) -> f64 {
        let p = &self.positions;
        if x <= p[0] {
            return self.net_doping[0];
        }
        if x >= p[p.len() - 1] {
            return self.net_doping[p.len() - 1];
        }
        let i = p.partition_point(|&v| v <= x) - 1;
        let t = (x - p[i]) / (p[i + 1] - p[i]);
        self.net_doping[i] + t * (self.net_doping[i + 1] - self.net_doping[i])
    }

    /// Positions where the net doping changes sign (linear interpolation).
    pub fn junctions(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.len().saturating_sub(1) {
            let (a, b) = (self.net_doping[i], self.net_doping[i + 1]);
            if a * b < 0.0 {
                let t = a / (a - b);
                out.push(self.positions[i] + t * (self.positions[i + 1] - self.positions[i]));
            }
        }
        out
    }
}

fn aperture_mask(x: f64, ap: &Interval, straggle: f64) -> f64 {
    if straggle <= 0.0 {
        return if ap.contains(x) { 1.0 } else { 0.0 };
    }
    let s = std::f64::consts::SQRT_2 * straggle;
    0.5 * (libm::erf((x - ap.start) / s) - libm::erf((x - ap.end) / s))
}

/// Donor-positive net doping at the readout depth for each lateral position.
pub fn lateral_net_doping(spec: &DeviceSpec, positions: &[f64]) -> Result<DopingProfile> {
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "positions must be strictly increasing".into(),
        ));
    }
    if let (Some(&first), Some(&last)) = (positions.first(), positions.last()) {
        if first < 0.0 || last > spec.device_length {
            return Err(Error::InvalidInput(format!(
                "positions [{first}, {last}] leave the device extent [0, {}]",
                spec.device_length
            )));
        }
    }
    let fraction = spec.effective_ionization_fraction;
    let background = -resistivity_to_acceptor_density(spec.substrate_resistivity)?;

    let mut contributions = Vec::new();
    for step in &spec.implants {
        let sign = match step.polarity {
            Polarity::Donor => 1.0,
            Polarity::Acceptor => -1.0,
            Polarity::Neutral => continue,
        };
        let entry = spec.range_table.lookup(step.species, step.energy_kev)?;
        let peak = gaussian_depth(step.dose_cm2, entry, spec.readout_depth_nm);
        contributions.push((sign * peak, step.aperture));
    }

    let net: Vec<f64> = positions
        .iter()
        .map(|&x| {
            let implanted: f64 = contributions
                .iter()
                .map(|(n, ap)| n * aperture_mask(x, ap, spec.lateral_straggle_um))
                .sum();
            fraction * (implanted + background)
        })
        .collect();

    let mut profile = DopingProfile::new(positions.to_vec(), net)?;
    if let (Some(a), Some(d)) = (spec.acceptor_aperture(), spec.donor_aperture()) {
        if a.overlaps(&d) {
            profile.warnings.push(DopingWarning::ApertureOverlap {
                acceptor: a,
                donor: d,
            });
        }
    }
    Ok(profile)
}
