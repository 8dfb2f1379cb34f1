//! Virtual experiments: spectra versus bias, line fits, modulation,
//! thresholds, Stark calibration, confocal maps and IV/forward sweeps.

mod calibrate;
mod device;
mod electrical;
mod fit;
mod scan;
mod spectrum;
mod sweep;

pub use crate::solver::ConfocalSpot;
pub use calibrate::{calibrate_stark, StarkCalibration};
pub use device::{ExcitationOptions, VirtualDevice};
pub use electrical::{
    forward_bias_experiment, iv_sweep, ForwardExperiment, IVCurve, PowerCalibration,
};
pub use fit::{fit_zpl, FitGuess, ZplFit, FIT_TOLERANCE, MAX_FIT_ITERATIONS};
pub use scan::{confocal_scan, correlate_maps, modulation_front, pearson, ScanGrid, ScanMaps};
pub use spectrum::{
    bright_profile, emitter_environment, integrated_response, synthesize_spectrum,
    EmitterEnvironment, OpticalModels, SpectralGrid, Spectrum,
};
pub use sweep::{
    center_shifts, fit_series, modulation_ratio, reverse_voltages, series_from_states,
    solve_sweep_states, threshold_from_shifts, threshold_voltage, voltage_sweep_spectra,
    ModulationPoint, SpectrumSeries, SweepStates,
};
