//! Two-species water-quality dynamics on a segmented network.

pub mod kinetics;
mod model;
mod scenario;
mod sensor;

pub use kinetics::{
    junction_mixing, pipe_segment_update, reaction_rates, tank_update, wall_decay_coefficient, Mixing,
    TankStep, STAGNATION_THRESHOLD,
};
pub use model::{SegmentedState, StepDiagnostics, Trajectory, WqModel};
pub use scenario::{Booster, BoosterWindow, InitialValue, ReactionAdjustment, Scenario};
pub use sensor::{build_measurement, MeasuredSpecies, SensorModel};
