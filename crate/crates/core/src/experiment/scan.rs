use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::device::VirtualDevice;
use super::spectrum::{bright_profile, integrated_response};
use super::sweep::solve_sweep_states;
use crate::device::Interval;
use crate::error::{Error, Result};
use crate::solver::{photocurrent, SolverState};

/// Raster definition. The lateral axis follows the solver coordinate; the
/// transverse axis replicates the 1D solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGrid {
    /// Lateral margin added on each side of the ensemble window [µm].
    pub margin: f64,
    pub step: f64,
    /// Transverse height of the emitting aperture [µm].
    pub aperture_height: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            margin: 5.0,
            step: 1.0,
            aperture_height: 50.0,
        }
    }
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.margin >= 0.0) || !(self.aperture_height > 0.0) {
            return Err(Error::config(
                "scan",
                "step and aperture_height must be positive, margin non-negative",
            ));
        }
        Ok(())
    }

    fn axis(start: f64, end: f64, step: f64) -> Vec<f64> {
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + k as f64 * step).collect()
    }

    pub fn lateral(&self, window: Interval) -> Vec<f64> {
        Self::axis(window.start - self.margin, window.end + self.margin, self.step)
    }

    pub fn transverse(&self) -> Vec<f64> {
        let h = 0.5 * self.aperture_height + self.margin;
        Self::axis(-h, h, self.step)
    }
}

/// PL and photocurrent maps at one bias. Matrices are indexed `[iy][ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMaps {
    pub bias: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub in_aperture: Vec<Vec<bool>>,
    /// Spot-integrated PL relative to the brightest zero-bias pixel.
    pub pl: Vec<Vec<f64>>,
    /// PL over the same pixel at zero bias; NaN outside the aperture.
    pub pl_modulation: Vec<Vec<f64>>,
    /// Light minus dark terminal current [A].
    pub photocurrent: Vec<Vec<f64>>,
    /// Per lateral pixel: solver failure message, if any.
    pub failures: Vec<Option<String>>,
}

impl ScanMaps {
    /// Values over aperture pixels with a finite modulation.
    pub fn aperture_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.y.len()).flat_map(move |iy| {
            (0..self.x.len())
                .filter(move |&ix| self.in_aperture[iy][ix] && self.pl_modulation[iy][ix].is_finite())
                .map(move |ix| (iy, ix))
        })
    }

    /// Mean suppression (1 − modulation) over aperture pixels whose lateral
    /// position lies in `band`.
    pub fn mean_suppression(&self, band: Interval) -> Option<f64> {
        let v: Vec<f64> = self
            .aperture_pixels()
            .filter(|&(_, ix)| band.contains(self.x[ix]))
            .map(|(iy, ix)| 1.0 - self.pl_modulation[iy][ix])
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn csv(&self) -> String {
        use std::fmt::Write;
        let f = crate::solver::fmt9;
        let mut s = String::from("x_um,y_um,in_aperture,pl,modulation,photocurrent_A\n");
        for (iy, y) in self.y.iter().enumerate() {
            for (ix, x) in self.x.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    f(*x),
                    f(*y),
                    u8::from(self.in_aperture[iy][ix]),
                    f(self.pl[iy][ix]),
                    f(self.pl_modulation[iy][ix]),
                    f(self.photocurrent[iy][ix])
                );
            }
        }
        s
    }
}

fn spot_pl(device: &VirtualDevice, env: &super::spectrum::EmitterEnvironment, th: crate::emitter::ThermalResponse, x: f64) -> f64 {
    integrated_response(&device.emitters, env, &device.spot(x), th, &device.models).0
}

/// PL modulation and photocurrent over a raster at `bias`.
pub fn confocal_scan(device: &VirtualDevice, bias: f64, grid: &ScanGrid) -> Result<ScanMaps> {
    grid.validate()?;
    let voltages = if bias == 0.0 { vec![0.0] } else { vec![0.0, bias] };
    let states = solve_sweep_states(device, &voltages, 1.0)?;
    let last = states.points.len() - 1;
    let window = device.ensemble.aperture;
    let x = grid.lateral(window);
    let y = grid.transverse();

    let pl0: Vec<f64> = x
        .iter()
        .map(|&xi| spot_pl(device, &states.environments[0], states.thermal[0], xi))
        .collect();
    let plv: Vec<f64> = x
        .iter()
        .map(|&xi| spot_pl(device, &states.environments[last], states.thermal[last], xi))
        .collect();
    let dark = &states.points[last].state;
    let pc: Vec<std::result::Result<f64, String>> = x
        .par_iter()
        .map(|&xi| {
            photocurrent(
                dark,
                &device.spot(xi),
                &device.excitation.photo,
                &device.simulation.options,
            )
            .map_err(|e| e.to_string())
        })
        .collect();

    let half_h = 0.5 * grid.aperture_height;
    let norm = x
        .iter()
        .zip(&pl0)
        .filter(|(xi, _)| window.contains(**xi))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let mut in_aperture = Vec::with_capacity(y.len());
    let mut pl = Vec::with_capacity(y.len());
    let mut modulation = Vec::with_capacity(y.len());
    let mut current = Vec::with_capacity(y.len());
    for &yi in &y {
        let mask: Vec<bool> = x.iter().map(|&xi| window.contains(xi) && yi.abs() <= half_h).collect();
        pl.push(
            mask.iter()
                .zip(&plv)
                .map(|(m, v)| if *m && norm > 0.0 { v / norm } else { 0.0 })
                .collect(),
        );
        modulation.push(
            mask.iter()
                .zip(plv.iter().zip(&pl0))
                .map(|(m, (v, v0))| if *m && *v0 > 0.0 { v / v0 } else { f64::NAN })
                .collect(),
        );
        current.push(pc.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect());
        in_aperture.push(mask);
    }
    Ok(ScanMaps {
        bias,
        x,
        y,
        in_aperture,
        pl,
        pl_modulation: modulation,
        photocurrent: current,
        failures: pc.into_iter().map(|r| r.err()).collect(),
    })
}

/// Pearson correlation of (1 − modulation) with photocurrent magnitude over
/// aperture pixels. `None` if either map is constant there.
pub fn correlate_maps(maps: &ScanMaps) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = maps
        .aperture_pixels()
        .map(|(iy, ix)| (1.0 - maps.pl_modulation[iy][ix], maps.photocurrent[iy][ix].abs()))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    pearson(&pairs)
}

pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    // Constant within rounding counts as constant.
    let tiny = |s: f64, m: f64| s <= (1e-12 * m.abs().max(f64::MIN_POSITIVE)).powi(2) * n;
    if tiny(saa, ma) || tiny(sbb, mb) {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Lateral position of the 50% bright-fraction front: walking from the n
/// side of `span` toward the p side, the first point where the bright
/// fraction recovers to `level`. Linearly interpolated; sampled at `step`.
pub fn modulation_front(
    state: &SolverState,
    reference: &SolverState,
    device: &VirtualDevice,
    span: Interval,
    step: f64,
    level: f64,
) -> Option<f64> {
    let n = (span.width() / step).ceil() as usize;
    let xs: Vec<f64> = (0..=n).map(|k| span.end - k as f64 * step).collect();
    let b = bright_profile(state, reference, &xs, &device.models.charge_state);
    if b[0] >= level {
        return None;
    }
    let k = b.iter().position(|v| *v >= level)?;
    let t = (level - b[k - 1]) / (b[k] - b[k - 1]);
    Some(xs[k - 1] + t * (xs[k] - xs[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_patterns_correlate_fully() {
        let p: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((pearson(&p).unwrap() - 1.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 2.0)).collect();
        assert_eq!(pearson(&c), None);
    }

    #[test]
    fn grid_axes() {
        let g = ScanGrid::default();
        let x = g.lateral(Interval::new(526.5, 576.5));
        assert_eq!(x.len(), 61);
        assert_eq!(g.transverse().len(), 61);
    }
}
