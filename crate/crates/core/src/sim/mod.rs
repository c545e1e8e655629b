//! Two-lane freeway corridor with detectors, roadside units and an
//! optional inner-lane closure.

mod arrivals;
mod idm;
mod log;
mod run;
mod scenario;
mod world;

use thiserror::Error;

pub use arrivals::{rate_profile, spawn_arrivals, Arrival};
pub use idm::IdmParams;
pub use log::{
    write_detectors_csv, write_trajectories_csv, write_uploads_csv, CvRecord, DetectorRecord, SimLog, TrajectoryPoint,
    VehicleSummary, DETECTORS_CSV_HEADER, TRAJECTORIES_CSV_HEADER, UPLOADS_CSV_HEADER,
};
pub use run::run;
pub use scenario::{
    build_scenario, ArrivalKind, ClosureConfig, CorridorConfig, CvConfig, DemandConfig, OutputConfig, Scenario,
    ScenarioConfig, TimingConfig, CORRIDOR_MI, NOMINAL_DEMAND_VEH, STEP_S,
};
pub use world::{Crossing, Exit, LaneChangeParams, StepEvents, VehicleState, World, INNER_LANE, OUTER_LANE};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("collision at t={time_s:.1}s: vehicle {follower} overlaps {leader} by {gap_m:.3} m")]
    Collision { time_s: f64, follower: u32, leader: u32, gap_m: f64 },
    #[error("vehicle {vehicle} entered the closed lane at t={time_s:.1}s")]
    ClosureBreach { time_s: f64, vehicle: u32 },
    #[error("integrity: {0}")]
    Integrity(String),
}
