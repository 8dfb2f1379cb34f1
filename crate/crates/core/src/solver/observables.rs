use serde::{Deserialize, Serialize};

use super::gummel::poisson_residual_scaled;
use super::numerics::bernoulli;
use super::state::SolverState;
use crate::constants::{CM_PER_UM, Q};

/// Terminal current [A] at the first and last edge.
///
/// At each contact the minority-carrier flux is taken directly from the
/// contact edge. The majority flux there is the difference of two nearly
/// equal terms, so it is instead carried over from the edge where that
/// carrier's flux scale is smallest, adding the net recombination of the
/// control volumes in between.
pub fn terminal_currents(state: &SolverState) -> (f64, f64) {
    let (jn, jp) = carrier_current_densities(state);
    let pr = &state.problem;
    let m = state.psi.len();
    let vol = pr.control_volumes_cm();
    let net: Vec<f64> = (0..m)
        .map(|i| {
            let g = state.generation.as_ref().map_or(0.0, |g| g[i]);
            Q * vol[i] * (srh_rate(state, i) - g)
        })
        .collect();
    let flux_scale = |c: &[f64], i: usize| (c[i] + c[i + 1]) / pr.h[i];
    let argmin = |c: &[f64]| {
        (0..m - 1)
            .min_by(|&a, &b| flux_scale(c, a).total_cmp(&flux_scale(c, b)))
            .unwrap()
    };
    let kp = argmin(&state.p);
    let kn = argmin(&state.n);
    let jp_left = jp[kp] + net[1..=kp].iter().sum::<f64>();
    let jn_right = jn[kn] + net[kn + 1..m - 1].iter().sum::<f64>();
    let a = pr.area_cm2;
    ((jn[0] + jp_left) * a, (jn_right + jp[m - 2]) * a)
}

/// SRH net recombination rate at node `i` [cm⁻³·s⁻¹], mid-gap trap.
pub fn srh_rate(state: &SolverState, i: usize) -> f64 {
    let mat = state.material();
    let ni = mat.intrinsic_density;
    let (n, p) = (state.n[i], state.p[i]);
    (n * p - ni * ni) / (mat.tau_p * (n + ni) + mat.tau_n * (p + ni))
}

/// Total conduction current density per edge [A/cm²], positive along +x.
pub fn current_density(state: &SolverState) -> Vec<f64> {
    let (jn, jp) = carrier_current_densities(state);
    jn.iter().zip(&jp).map(|(a, b)| a + b).collect()
}

/// Scharfetter–Gummel electron and hole current densities per edge [A/cm²].
pub fn carrier_current_densities(state: &SolverState) -> (Vec<f64>, Vec<f64>) {
    let pr = &state.problem;
    let mat = &pr.material;
    let scale_n = Q * pr.ni * mat.diffusivity_n() / pr.debye;
    let scale_p = Q * pr.ni * mat.diffusivity_p() / pr.debye;
    let m = state.psi.len();
    let mut jn = Vec::with_capacity(m - 1);
    let mut jp = Vec::with_capacity(m - 1);
    for i in 0..m - 1 {
        let d = (state.psi[i + 1] - state.psi[i]) / pr.vt;
        let (n0, n1) = (state.n[i] / pr.ni, state.n[i + 1] / pr.ni);
        let (p0, p1) = (state.p[i] / pr.ni, state.p[i + 1] / pr.ni);
        let h = pr.h[i];
        jn.push(scale_n * (bernoulli(d) * n1 - bernoulli(-d) * n0) / h);
        jp.push(scale_p * (bernoulli(d) * p0 - bernoulli(-d) * p1) / h);
    }
    (jn, jp)
}

/// Relative mismatch between the two terminal currents.
pub fn current_mismatch(state: &SolverState) -> f64 {
    let (a, b) = terminal_currents(state);
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// E = −dψ/dx on every edge [V/cm].
pub fn electric_field(state: &SolverState) -> Vec<f64> {
    let x = state.positions();
    (0..x.len() - 1)
        .map(|i| -(state.psi[i + 1] - state.psi[i]) / ((x[i + 1] - x[i]) * CM_PER_UM))
        .collect()
}

/// Field at an arbitrary position [V/cm], linear between edge midpoints.
pub fn field_at(state: &SolverState, field: &[f64], x: f64) -> f64 {
    let mids = state.mesh().edge_midpoints();
    interpolate(&mids, field, x)
}

/// Linear interpolation on a sorted abscissa, clamped at both ends.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// ρ = q(p − n + N) per node [C/cm³].
pub fn space_charge(state: &SolverState) -> Vec<f64> {
    state
        .p
        .iter()
        .zip(&state.n)
        .zip(state.doping())
        .map(|((p, n), d)| Q * (p - n + d))
        .collect()
}

/// Largest diagonally scaled Poisson residual [V]: the correction a Newton
/// step would apply to the worst node.
pub fn poisson_residual(state: &SolverState) -> f64 {
    let pr = &state.problem;
    let n: Vec<f64> = state.n.iter().map(|v| v / pr.ni).collect();
    let p: Vec<f64> = state.p.iter().map(|v| v / pr.ni).collect();
    let psi: Vec<f64> = state.psi.iter().map(|v| v / pr.vt).collect();
    poisson_residual_scaled(pr, &psi, &n, &p) * pr.vt
}

/// Band edges and quasi-Fermi levels [eV], referenced so that the electron
/// quasi-Fermi level at the last (grounded) contact is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDiagram {
    pub ec: Vec<f64>,
    pub ev: Vec<f64>,
    pub ei: Vec<f64>,
    pub efn: Vec<f64>,
    pub efp: Vec<f64>,
}

pub fn band_diagram(state: &SolverState) -> BandDiagram {
    let mat = state.material();
    let kt = mat.thermal_voltage();
    let offset = 0.5 * mat.bandgap + 0.5 * kt * (mat.nc / mat.nv).ln();
    let ei: Vec<f64> = state.psi.iter().map(|v| -v).collect();
    let ec: Vec<f64> = ei.iter().map(|e| e + offset).collect();
    let ev = ec.iter().map(|e| e - mat.bandgap).collect();
    BandDiagram {
        ec,
        ev,
        efn: state.phi_n.iter().map(|v| -v).collect(),
        efp: state.phi_p.iter().map(|v| -v).collect(),
        ei,
    }
}

/// Depleted interval around the metallurgical junction [µm].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepletionRegion {
    /// Edge on the donor side.
    pub x_n: f64,
    /// Edge on the acceptor side.
    pub x_p: f64,
}

impl DepletionRegion {
    pub fn width(&self) -> f64 {
        (self.x_n - self.x_p).abs()
    }

    pub fn lower(&self) -> f64 {
        self.x_n.min(self.x_p)
    }

    pub fn upper(&self) -> f64 {
        self.x_n.max(self.x_p)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }
}

/// Majority-carrier density over |N| at each node.
fn majority_ratio(state: &SolverState) -> Vec<f64> {
    state
        .doping()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                state.n[i] / d
            } else if d < 0.0 {
                state.p[i] / -d
            } else {
                0.0
            }
        })
        .collect()
}

/// Edge of the depleted region between a depleted node `a` and an
/// undepleted neighbour `b`, interpolating ln(ratio) to ln(fraction).
fn edge_between(x: &[f64], r: &[f64], a: usize, b: usize, fraction: f64) -> f64 {
    let (ra, rb) = (r[a].max(1e-300).ln(), r[b].max(1e-300).ln());
    let target = fraction.ln();
    if rb == ra {
        return x[a];
    }
    let t = ((target - ra) / (rb - ra)).clamp(0.0, 1.0);
    x[a] + t * (x[b] - x[a])
}

/// Outermost edges of the connected region around the first metallurgical
/// junction in which the majority carrier density is below `fraction`·|N|.
/// Returns `None` when no node next to the junction is depleted.
pub fn depletion_edges(state: &SolverState, fraction: f64) -> Option<DepletionRegion> {
    assert!(fraction > 0.0 && fraction < 1.0, "fraction must lie in (0, 1)");
    let d = state.doping();
    let x = state.positions();
    let j = (0..d.len() - 1).find(|&i| d[i] * d[i + 1] < 0.0)?;
    let r = majority_ratio(state);
    let depleted = |i: usize| r[i] < fraction;
    if !depleted(j) && !depleted(j + 1) {
        return None;
    }
    let (mut lo, mut hi) = if depleted(j) { (j, j) } else { (j + 1, j + 1) };
    if depleted(j) && depleted(j + 1) {
        hi = j + 1;
    }
    while lo > 0 && depleted(lo - 1) {
        lo -= 1;
    }
    while hi + 1 < d.len() && depleted(hi + 1) {
        hi += 1;
    }
    let left = if lo > 0 {
        edge_between(x, &r, lo, lo - 1, fraction)
    } else {
        x[0]
    };
    let right = if hi + 1 < d.len() {
        edge_between(x, &r, hi, hi + 1, fraction)
    } else {
        x[d.len() - 1]
    };
    // the left side carries the sign of d[j]
    Some(if d[j] > 0.0 {
        DepletionRegion { x_n: left, x_p: right }
    } else {
        DepletionRegion { x_n: right, x_p: left }
    })
}

/// Charge-equivalent depletion width [µm]: ∫ max(0, 1 − majority/|N|) dx.
/// This is the width of fully ionized space charge the depletion
/// approximation assigns to the same exposed dopant charge.
pub fn depletion_width(state: &SolverState) -> f64 {
    let r = majority_ratio(state);
    let x = state.positions();
    let f: Vec<f64> = r
        .iter()
        .zip(state.doping())
        .map(|(&ri, &d)| if d == 0.0 { 0.0 } else { (1.0 - ri).max(0.0) })
        .collect();
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1]))
        .sum()
}

/// Electrostatic potential drop between the last and first node [V].
pub fn potential_drop(state: &SolverState) -> f64 {
    state.psi[state.psi.len() - 1] - state.psi[0]
}
