use serde::{Deserialize, Serialize};

use super::material::MaterialParams;
use crate::constants::CM_PER_UM;
use crate::device::DopingProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshOptions {
    /// Lower spacing clamp [µm].
    pub min_spacing_um: f64,
    /// Upper spacing clamp [µm].
    pub max_spacing_um: f64,
    /// Target spacing as a multiple of the local Debye length.
    pub debye_fraction: f64,
    /// Maximum spacing growth per unit length; bounds the ratio of adjacent
    /// cells by roughly 1 + grading.
    pub grading: f64,
    /// Spacing grows by this fraction of the distance from the nearest
    /// metallurgical junction.
    pub junction_refinement: f64,
    /// Resolution at which the doping profile is probed [µm].
    pub probe_spacing_um: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            min_spacing_um: 1e-3,
            max_spacing_um: 1.0,
            debye_fraction: 0.25,
            grading: 0.5,
            junction_refinement: 0.01,
            probe_spacing_um: 5e-3,
        }
    }
}

impl MeshOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_spacing_um > 0.0
            && self.max_spacing_um >= self.min_spacing_um
            && self.debye_fraction > 0.0
            && self.grading > 0.0
            && self.grading <= 1.0
            && self.junction_refinement > 0.0
            && self.probe_spacing_um > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "solver.mesh",
                format!("inconsistent mesh options {self:?}"),
            ))
        }
    }
}

/// Nonuniform 1D mesh, node coordinates in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::config("solver.mesh", "mesh needs at least 3 nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(
                "solver.mesh",
                "mesh nodes must be finite and strictly increasing",
            ));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(start: f64, end: f64, cells: usize) -> Result<Self> {
        let nodes = (0..=cells)
            .map(|i| start + (end - start) * i as f64 / cells as f64)
            .collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell widths [µm], one per edge.
    pub fn spacing(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Midpoints of the edges [µm].
    pub fn edge_midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn max_grading_ratio(&self) -> f64 {
        self.spacing()
            .windows(2)
            .map(|w| (w[1] / w[0]).max(w[0] / w[1]))
            .fold(1.0, f64::max)
    }

    /// Index of the edge containing `x` (clamped to the mesh).
    pub fn edge_index(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&v| v <= x);
        i.clamp(1, self.nodes.len() - 1) - 1
    }
}

/// Builds a mesh over the full extent of `profile`.
///
/// The target spacing at each point is min(√(λ·ℓ), λ + r·d_j), clamped to
/// the configured range, where λ is a fixed fraction of the local Debye length, ℓ = |N|/|dN/dx|
/// the doping scale length and d_j the distance to the nearest sign change of
/// N. The target is then made Lipschitz with slope `grading` and nodes are
/// placed by equidistributing ∫dx/h.
pub fn build_mesh(
    profile: &DopingProfile,
    material: &MaterialParams,
    options: &MeshOptions,
) -> Result<Mesh1D> {
    options.validate()?;
    let (start, end) = (profile.start(), profile.end());
    let length = end - start;
    if !(length >= 3.0 * options.min_spacing_um) {
        return Err(Error::config(
            "device",
            format!(
                "device extent {length} µm is shorter than three minimal cells ({} µm)",
                3.0 * options.min_spacing_um
            ),
        ));
    }

    let probes = ((length / options.probe_spacing_um).ceil() as usize).clamp(1000, 2_000_000);
    let dx = length / probes as f64;
    let xs: Vec<f64> = (0..=probes).map(|i| start + dx * i as f64).collect();
    let doping: Vec<f64> = xs.iter().map(|&x| profile.at(x)).collect();

    let mut junctions = Vec::new();
    for i in 0..probes {
        let (a, b) = (doping[i], doping[i + 1]);
        if a * b < 0.0 {
            junctions.push(xs[i] + dx * a / (a - b));
        }
    }

    let ni = material.intrinsic_density;
    let mut h: Vec<f64> = (0..=probes)
        .map(|i| {
            let n = doping[i].abs();
            let lambda = options.debye_fraction * material.debye_length(n + ni) / CM_PER_UM;
            let grad = match i {
                0 => (doping[1] - doping[0]) / dx,
                _ if i == probes => (doping[i] - doping[i - 1]) / dx,
                _ => (doping[i + 1] - doping[i - 1]) / (2.0 * dx),
            }
            .abs();
            let scale_len = if grad > 0.0 { (n + ni) / grad } else { f64::INFINITY };
            let dj = junctions
                .iter()
                .map(|j| (xs[i] - j).abs())
                .fold(f64::INFINITY, f64::min);
            (lambda * scale_len)
                .sqrt()
                .min(lambda + options.junction_refinement * dj)
                .clamp(options.min_spacing_um, options.max_spacing_um)
        })
        .collect();

    let g = options.grading * dx;
    for i in 1..h.len() {
        h[i] = h[i].min(h[i - 1] + g);
    }
    for i in (0..h.len() - 1).rev() {
        h[i] = h[i].min(h[i + 1] + g);
    }

    // h is taken piecewise linear between probes, so ∫dx/h is logarithmic
    // and the inverse below grows cells geometrically inside a probe cell.
    let slope: Vec<f64> = h.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    let mut cumulative = vec![0.0; h.len()];
    for i in 1..h.len() {
        let a = slope[i - 1];
        let step = if (a * dx).abs() < 1e-9 * h[i - 1] {
            dx / h[i - 1]
        } else {
            (h[i] / h[i - 1]).ln() / a
        };
        cumulative[i] = cumulative[i - 1] + step;
    }
    let total = cumulative[probes];
    let cells = ((total - 1e-6).ceil() as usize).max(2);
    let mut nodes = Vec::with_capacity(cells + 1);
    nodes.push(start);
    let mut j = 0;
    for k in 1..cells {
        let target = total * k as f64 / cells as f64;
        while cumulative[j + 1] < target {
            j += 1;
        }
        let (s, a) = (target - cumulative[j], slope[j]);
        let offset = if (a * dx).abs() < 1e-9 * h[j] {
            s * h[j]
        } else {
            h[j] * (a * s).exp_m1() / a
        };
        nodes.push(xs[j] + offset.clamp(0.0, dx));
    }
    nodes.push(end);
    Mesh1D::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn material() -> MaterialParams {
        MaterialParams::default()
    }

    #[test]
    fn uniform_doping_gives_max_spacing() {
        let p = DopingProfile::uniform(0.0, 50.0, 1e16).unwrap();
        let m = build_mesh(&p, &material(), &MeshOptions::default()).unwrap();
        assert_eq!(m.len(), 51);
        for h in m.spacing() {
            assert!((h - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn abrupt_junction_is_refined() {
        let p = DopingProfile::abrupt(0.0, 20.0, 10.0, -1e14, 1e19, 0.005).unwrap();
        let m = build_mesh(&p, &material(), &MeshOptions::default()).unwrap();
        let fine = m
            .nodes()
            .windows(2)
            .filter(|w| (0.5 * (w[0] + w[1]) - 10.0).abs() < 0.5)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        assert!(fine < 0.01, "{fine}");
        assert!(m.max_grading_ratio() <= 2.0, "{}", m.max_grading_ratio());
    }

    #[test]
    fn too_short_device_is_a_config_error() {
        let p = DopingProfile::uniform(0.0, 0.002, 1e16).unwrap();
        assert!(matches!(
            build_mesh(&p, &material(), &MeshOptions::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn edge_lookup_clamps() {
        let m = Mesh1D::uniform(0.0, 4.0, 4).unwrap();
        assert_eq!(m.edge_index(-1.0), 0);
        assert_eq!(m.edge_index(1.5), 1);
        assert_eq!(m.edge_index(4.0), 3);
        assert_eq!(m.edge_index(9.0), 3);
    }
}
