//! Closed-loop executor: a learned (or scripted) source drives the approach
//! until the grasp detector sees both jaws closed for three consecutive
//! frames, then a fixed waypoint path lifts and rehangs the carcass. Jaw
//! changes go out over an emulated valve link.

mod detector;
mod episode;
mod valve;
mod waypoints;

pub use detector::{detector_update, GraspDetector, DETECTOR_FRAMES};
pub use episode::{
    run_episode, run_episode_with_spec, ActionSource, Episode, EpisodeLog, ExpertSource, TickRecord, World,
};
pub use valve::{valve_ack, valve_encode, valve_parse, ValveBoard, ValveExchange, ValveLink};
pub use waypoints::{RehangExecutor, RuntimeConfig, Waypoint, WaypointPath, WAYPOINT_COUNT};
