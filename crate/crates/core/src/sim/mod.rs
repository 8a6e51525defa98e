//! Parametric road geometry and scripted kinematic simulation.
//!
//! Towns are realized as small analytic road networks; actors follow lane
//! centrelines under closed-form speed profiles, so a trace is a pure
//! function of `(instance, geometry)`.

mod collide;
mod geometry;
mod path;
mod script;
mod trace;

use thiserror::Error;

pub use collide::{detect_collisions, footprint, CollisionEvent, Obb};
pub use geometry::{
    adversary_leg, build_geometry, heading_change, junction_legs, region_half, Lane, Leg, Place,
    Road, RoadGeometry, Script, SignalColor, SignalHead, SignalSchedule, StopLine,
    CROSS_OFFSET_S, CURVE_RADIUS_M, CURVE_SWEEP_DEG, LEG_LENGTH_M, SIGNAL_CYCLE_S,
    SIGNAL_GREEN_S, SIGNAL_YELLOW_S, STOP_LINE_SETBACK_M, STRAIGHT_LENGTH_M,
};
pub use path::{wrap_angle, Pose, RefPath, Seg};
pub use script::{
    junction_route, plan, ramp_at, run, Plan, Profile, Ramp, SimConfig, Trigger, DECEL_MPS2,
    LEAD_S, RAMP_S,
};
pub use trace::{ActorMeta, ActorState, Frame, SignalState, Trace, TraceError, TraceMeta};

use crate::sampler::ScenarioInstance;

pub const LANE_WIDTH_M: f64 = 3.5;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("instance template digest {instance:016x} does not match geometry {geometry:016x}")]
    DigestMismatch { instance: u64, geometry: u64 },
    #[error("missing binding `{0}`")]
    MissingBinding(String),
    #[error("scenario has no actors")]
    EmptyCast,
    #[error("junction has no `{0}` leg")]
    MissingLeg(&'static str),
}

/// Simulates `instance` with the default timestep and horizon.
pub fn simulate(instance: &ScenarioInstance, geometry: &RoadGeometry) -> Result<Trace, SimError> {
    simulate_with(instance, geometry, SimConfig::default())
}

pub fn simulate_with(
    instance: &ScenarioInstance,
    geometry: &RoadGeometry,
    cfg: SimConfig,
) -> Result<Trace, SimError> {
    let plans = plan(instance, geometry)?;
    Ok(run(instance, geometry, &plans, cfg))
}
