//! Device description and lateral doping at the emitter readout plane.

mod doping;
mod implant;
mod spec;

pub use doping::{
    hole_mobility_caughey_thomas, lateral_net_doping, resistivity_to_acceptor_density,
    DopingProfile, DopingWarning, HOLE_MOBILITY_FIT,
};
pub use implant::{
    implant_depth_profile, ImplantStep, Interval, IonSpecies, Polarity, RangeEntry, RangeTable,
};
pub use spec::DeviceSpec;
