use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::material::MaterialParams;
use super::mesh::{build_mesh, Mesh1D, MeshOptions};
use crate::constants::CM_PER_UM;
use crate::device::{lateral_net_doping, DeviceSpec, DopingProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest per-node potential change in one Newton step [V].
    pub potential_update_clamp: f64,
    /// Convergence threshold on potential and quasi-Fermi updates [V].
    pub absolute_tolerance: f64,
    pub max_outer_iterations: usize,
    pub max_newton_iterations: usize,
    /// Every this many Gummel iterations a fully coupled Newton solve is tried.
    pub gummel_stall_iterations: usize,
    /// Largest continuation step [V].
    pub bias_step_max: f64,
    /// Continuation gives up once the step falls below this [V].
    pub bias_step_min: f64,
    /// Forward biases above this are flagged [V].
    pub forward_safety_limit: f64,
    /// Optional pair-generation rate per mesh node [cm⁻³·s⁻¹].
    #[serde(skip)]
    pub generation_profile: Option<Vec<f64>>,
    pub mesh: MeshOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            potential_update_clamp: 0.5,
            absolute_tolerance: 1e-6,
            max_outer_iterations: 2000,
            max_newton_iterations: 100,
            gummel_stall_iterations: 100,
            bias_step_max: 1.0,
            bias_step_min: 1e-3,
            forward_safety_limit: 60.0,
            generation_profile: None,
            mesh: MeshOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("potential_update_clamp", self.potential_update_clamp),
            ("absolute_tolerance", self.absolute_tolerance),
            ("bias_step_max", self.bias_step_max),
            ("bias_step_min", self.bias_step_min),
            ("forward_safety_limit", self.forward_safety_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("solver.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if self.max_outer_iterations == 0 || self.max_newton_iterations == 0 {
            return Err(Error::config("solver.max_outer_iterations", "must be at least 1"));
        }
        if self.gummel_stall_iterations == 0 {
            return Err(Error::config("solver.gummel_stall_iterations", "must be at least 1"));
        }
        if let Some(g) = &self.generation_profile {
            if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(
                    "generation profile must be finite and nonnegative".into(),
                ));
            }
        }
        self.mesh.validate()
    }

    pub fn with_generation(&self, generation: Option<Vec<f64>>) -> Self {
        Self {
            generation_profile: generation,
            ..self.clone()
        }
    }
}

/// Discretized device: mesh, node doping and the scaled quantities the
/// iterations work with. Potentials are scaled by Vt, densities by ni and
/// lengths by the intrinsic Debye length.
#[derive(Debug, Clone)]
pub struct Problem {
    pub(crate) mesh: Mesh1D,
    pub(crate) material: MaterialParams,
    pub(crate) doping: Vec<f64>,
    pub(crate) vt: f64,
    pub(crate) ni: f64,
    pub(crate) debye: f64,
    pub(crate) h: Vec<f64>,
    pub(crate) vol: Vec<f64>,
    pub(crate) nd: Vec<f64>,
    /// Equilibrium potential of every node if it were charge neutral.
    pub(crate) psi_neutral: Vec<f64>,
    /// Weight of the applied bias in the continuation guess (1 on the
    /// biased side, 0 on the grounded side).
    pub(crate) bias_weight: Vec<f64>,
    /// Transverse cross-section used to convert A/cm² to A.
    pub(crate) area_cm2: f64,
}

impl Problem {
    pub fn new(
        profile: &DopingProfile,
        material: &MaterialParams,
        mesh: Mesh1D,
        area_cm2: f64,
    ) -> Result<Arc<Self>> {
        material.validate()?;
        if !(area_cm2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cross-section must be positive, got {area_cm2}"
            )));
        }
        let vt = material.thermal_voltage();
        let ni = material.intrinsic_density;
        let debye = material.intrinsic_debye_length();
        let scale = CM_PER_UM / debye;
        let x = mesh.nodes();
        let h: Vec<f64> = mesh.spacing().iter().map(|d| d * scale).collect();
        let n = x.len();
        let vol: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { h[i - 1] } else { 0.0 };
                let right = if i + 1 < n { h[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        let doping: Vec<f64> = x.iter().map(|&xi| profile.at(xi)).collect();
        let nd: Vec<f64> = doping.iter().map(|d| d / ni).collect();
        let psi_neutral: Vec<f64> = nd.iter().map(|d| (0.5 * d).asinh()).collect();

        let (x0, x1) = (x[0], x[n - 1]);
        let junction = profile
            .junctions()
            .into_iter()
            .find(|j| *j > x0 && *j < x1);
        let bias_weight = x
            .iter()
            .map(|&xi| match junction {
                Some(j) => {
                    if xi < j {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => (x1 - xi) / (x1 - x0),
            })
            .collect();

        Ok(Arc::new(Self {
            mesh,
            material: material.clone(),
            doping,
            vt,
            ni,
            debye,
            h,
            vol,
            nd,
            psi_neutral,
            bias_weight,
            area_cm2,
        }))
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    /// Net doping at the mesh nodes [cm⁻³].
    pub fn doping(&self) -> &[f64] {
        &self.doping
    }

    pub fn area_cm2(&self) -> f64 {
        self.area_cm2
    }

    pub fn len(&self) -> usize {
        self.doping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doping.is_empty()
    }

    /// Control-volume lengths [cm].
    pub fn control_volumes_cm(&self) -> Vec<f64> {
        self.vol.iter().map(|v| v * self.debye).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolverWarning {
    /// Forward bias applied beyond the configured safety limit.
    ForwardBiasBeyondLimit { bias: f64, limit: f64 },
}

/// Converged solution at one bias point. Potentials in V, densities in cm⁻³.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub problem: Arc<Problem>,
    pub psi: Vec<f64>,
    pub n: Vec<f64>,
    pub p: Vec<f64>,
    pub phi_n: Vec<f64>,
    pub phi_p: Vec<f64>,
    /// Applied at the first (left) contact relative to the last [V].
    pub bias: f64,
    /// Generation rate used for this solution [cm⁻³·s⁻¹], if any.
    pub generation: Option<Vec<f64>>,
    pub converged: bool,
    /// Largest diagonally scaled Poisson residual [V].
    pub residual_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<SolverWarning>,
}

impl SolverState {
    pub fn mesh(&self) -> &Mesh1D {
        &self.problem.mesh
    }

    pub fn material(&self) -> &MaterialParams {
        &self.problem.material
    }

    pub fn positions(&self) -> &[f64] {
        self.problem.mesh.nodes()
    }

    pub fn doping(&self) -> &[f64] {
        &self.problem.doping
    }
}

/// One point of a bias sweep.
#[derive(Debug, Clone)]
pub struct BiasPoint {
    pub voltage: f64,
    pub state: SolverState,
    /// Terminal current [A]; positive flows from the left contact into the
    /// device (forward for a p-left diode).
    pub terminal_current: f64,
    pub current_left: f64,
    pub current_right: f64,
}

/// A device ready to solve: discretized problem plus solver options.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub problem: Arc<Problem>,
    pub options: SolverOptions,
}

/// Resolution of the profile handed to the mesher [µm].
pub const PROFILE_SAMPLE_UM: f64 = 5e-3;

impl Simulation {
    pub fn from_profile(
        profile: &DopingProfile,
        material: &MaterialParams,
        options: SolverOptions,
        area_cm2: f64,
    ) -> Result<Self> {
        options.validate()?;
        let mesh = build_mesh(profile, material, &options.mesh)?;
        let problem = Problem::new(profile, material, mesh, area_cm2)?;
        Ok(Self { problem, options })
    }

    /// Contact-to-contact cut through a lateral device.
    pub fn from_spec(spec: &DeviceSpec, material: &MaterialParams, options: SolverOptions) -> Result<Self> {
        spec.validate()?;
        let mut material = material.clone();
        material.temperature = spec.temperature;
        material.relative_permittivity = spec.relative_permittivity;
        material.intrinsic_density = material.intrinsic_from_bands();
        let domain = spec.simulation_domain();
        let samples = (domain.width() / PROFILE_SAMPLE_UM).ceil() as usize;
        let xs: Vec<f64> = (0..=samples)
            .map(|i| domain.start + domain.width() * i as f64 / samples as f64)
            .collect();
        let profile = lateral_net_doping(spec, &xs)?;
        Self::from_profile(&profile, &material, options, spec.cross_section_cm2())
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.problem.mesh
    }
}
