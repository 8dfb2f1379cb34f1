//! One-dimensional drift-diffusion solver.
//!
//! Nonlinear Poisson (damped Newton) alternates with electron and hole
//! continuity (Scharfetter–Gummel fluxes, SRH recombination) in a Gummel
//! loop; bias is reached by continuation from thermal equilibrium.

mod export;
mod gummel;
mod material;
mod mesh;
mod newton;
mod numerics;
mod observables;
mod photo;
mod state;

pub use export::{fmt9, iv_csv, state_csv, sweep_iv_csv};
pub use gummel::{
    bias_point, resolve, solve_bias_sweep, solve_equilibrium, solve_equilibrium_problem,
    step_bias, BiasSweep,
};
pub use material::MaterialParams;
pub use mesh::{build_mesh, Mesh1D, MeshOptions};
pub use numerics::{bernoulli, bernoulli_derivative, solve_tridiagonal};
pub use observables::{
    band_diagram, carrier_current_densities, current_density, current_mismatch,
    depletion_edges, depletion_width, electric_field, field_at, interpolate, poisson_residual,
    potential_drop, space_charge, srh_rate, terminal_currents, BandDiagram, DepletionRegion,
};
pub use photo::{generation_profile, photocurrent, ConfocalSpot, PhotoOptions};
pub use state::{
    BiasPoint, Problem, Simulation, SolverOptions, SolverState, SolverWarning, PROFILE_SAMPLE_UM,
};
