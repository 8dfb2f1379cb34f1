use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-Lorentzian-plus-background fit of a zero-phonon line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZplFit {
    /// Line center [THz].
    pub center: f64,
    /// FWHM [GHz].
    pub fwhm: f64,
    /// Peak height above background, in the units of the spectrum.
    pub amplitude: f64,
    pub background: f64,
    /// RMS residual relative to the RMS of the data.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Amplitude below the detection floor.
    pub no_line: bool,
}

/// Starting point for [`fit_zpl`]; detunings in GHz from the grid center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGuess {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    pub background: f64,
}

impl FitGuess {
    /// Peak location, height and half-maximum width read off the data.
    pub fn from_data(offsets: &[f64], y: &[f64]) -> Self {
        let (imax, &ymax) = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap_or((0, &0.0));
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min).min(ymax);
        let half = ymin + 0.5 * (ymax - ymin);
        let lo = (0..imax).rev().find(|&i| y[i] < half).unwrap_or(0);
        let hi = (imax..y.len()).find(|&i| y[i] < half).unwrap_or(y.len() - 1);
        let step = (offsets[offsets.len() - 1] - offsets[0]) / (offsets.len() - 1) as f64;
        Self {
            amplitude: ymax - ymin,
            center: offsets[imax],
            fwhm: (offsets[hi] - offsets[lo]).max(2.0 * step),
            background: ymin,
        }
    }
}

pub const MAX_FIT_ITERATIONS: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-8;

fn model(p: &Vector4<f64>, f: f64) -> (f64, Vector4<f64>) {
    let (a, c, g, b) = (p[0], p[1], p[2], p[3]);
    let hw2 = 0.25 * g * g;
    let d = f - c;
    let den = d * d + hw2;
    let l = hw2 / den;
    let grad = Vector4::new(
        l,
        a * 2.0 * d * hw2 / (den * den),
        a * 0.5 * g * d * d / (den * den),
        1.0,
    );
    (a * l + b, grad)
}

fn cost(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&f, &v)| {
            let r = v - model(p, f).0;
            r * r
        })
        .sum()
}

/// Levenberg–Marquardt fit of `a·L(f; c, Γ) + b` with peak-normalized `L`.
///
/// `offsets` are detunings [GHz] from `grid_center` [THz]. Spectra whose fitted
/// amplitude falls below `floor` are flagged `no_line`.
pub fn fit_zpl(
    offsets: &[f64],
    intensity: &[f64],
    grid_center: f64,
    guess: Option<FitGuess>,
    floor: f64,
) -> Result<ZplFit> {
    if offsets.len() != intensity.len() || offsets.len() < 5 {
        return Err(Error::InvalidInput(
            "spectrum needs ≥ 5 points matching the grid".into(),
        ));
    }
    if intensity.iter().any(|v| !(v.is_finite() && *v >= -1e-300)) {
        return Err(Error::InvalidInput("spectrum must be finite and non-negative".into()));
    }
    let g = guess.unwrap_or_else(|| FitGuess::from_data(offsets, intensity));
    let span = offsets[offsets.len() - 1] - offsets[0];
    let yscale = intensity.iter().copied().fold(0.0, f64::max);
    let y_rms = (intensity.iter().map(|v| v * v).sum::<f64>() / intensity.len() as f64).sqrt();

    if yscale == 0.0 {
        return Ok(ZplFit {
            center: grid_center + g.center * 1e-3,
            fwhm: g.fwhm,
            amplitude: 0.0,
            background: 0.0,
            residual_norm: 0.0,
            converged: true,
            iterations: 0,
            no_line: true,
        });
    }

    let mut p = Vector4::new(g.amplitude, g.center, g.fwhm.abs().max(1e-9), g.background);
    let mut c0 = cost(&p, offsets, intensity);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&f, &v) in offsets.iter().zip(intensity) {
            let (m, grad) = model(&p, f);
            jtj += grad * grad.transpose();
            jtr += grad * (v - m);
        }
        let mut accepted = None;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[2] = trial[2].abs();
            let c1 = cost(&trial, offsets, intensity);
            if c1.is_finite() && c1 <= c0 {
                accepted = Some((trial, step, c1));
                lambda = (lambda * 0.1).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
        let Some((trial, step, c1)) = accepted else {
            // No downhill step exists at machine precision.
            converged = true;
            break;
        };
        let scales = [yscale, p[2].max(1e-6 * span), p[2].max(1e-6 * span), yscale];
        let rel = (0..4)
            .map(|k| step[k].abs() / (p[k].abs().max(scales[k])))
            .fold(0.0, f64::max);
        p = trial;
        c0 = c1;
        if rel < FIT_TOLERANCE {
            converged = true;
            break;
        }
    }

    let residual_norm = (c0 / intensity.len() as f64).sqrt() / y_rms;
    Ok(ZplFit {
        center: grid_center + p[1] * 1e-3,
        fwhm: p[2],
        amplitude: p[0],
        background: p[3],
        residual_norm,
        converged: converged && p[2] > 0.0,
        iterations,
        no_line: p[0] < floor,
    })
}
