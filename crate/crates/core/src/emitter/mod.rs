//! Optical response of the G-center ensemble: linear Stark shift, bright/dark
//! charge-state population, thermal quenching, and the free-exciton control
//! line.

mod charge;
mod ensemble;
mod thermal;

pub use charge::{ChargeStateModel, FermiReference, LocalBands};
pub use ensemble::{
    ensemble_csv, g_center_frequency_thz, sample_ensemble, stark_shift, AngleMixture, Emitter,
    EnsembleSpec,
};
pub use thermal::{ExcitonModel, ExcitonResponse, ThermalModel, ThermalResponse};
