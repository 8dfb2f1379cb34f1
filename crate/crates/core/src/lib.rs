//! Drift-diffusion simulation of a lateral p⁺-p-n⁺ silicon-on-insulator diode
//! with an embedded G-center ensemble, plus the virtual optical experiments
//! built on top of it: bias-swept photoluminescence spectra, Stark tuning,
//! charge-state modulation, confocal PL/photocurrent maps and forward-bias
//! heating.
//!
//! The crate is organised bottom-up:
//!
//! * [`device`] turns an implant recipe into a lateral net-doping profile.
//! * [`solver`] solves Poisson plus electron/hole continuity on a 1D mesh.
//! * [`emitter`] maps local field, band bending and temperature to the optical
//!   response of individual emitters.
//! * [`experiment`] composes the two into spectra, fits, maps and IV curves.
//! * [`config`] holds the declarative run configuration used by the CLI.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod device;
pub mod emitter;
pub mod error;
pub mod experiment;
pub mod solver;

pub use error::{Error, Result};
