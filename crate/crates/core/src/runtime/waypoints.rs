//! The fixed seven-waypoint rehang path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{dist3, SimConfig};
use crate::types::{Action, Jaws};

pub const WAYPOINT_COUNT: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    pub max_ticks: u64,
    /// A waypoint counts as reached within this distance.
    pub waypoint_tol: f64,
    /// Height of the first waypoint above the grasp point.
    pub lift_height: f64,
    /// Travel height between table and shackle.
    pub transit_z: f64,
    /// Approach height above the shackle before the final descent.
    pub shackle_approach: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            max_ticks: 400,
            waypoint_tol: 0.005,
            lift_height: 0.10,
            transit_z: 0.55,
            shackle_approach: 0.05,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self, sim: &SimConfig) -> Result<()> {
        if self.max_ticks == 0 || !(self.waypoint_tol > 0.0) || !(self.lift_height > 0.0) {
            return Err(Error::Config("max_ticks, waypoint_tol and lift_height must be positive".into()));
        }
        if !(self.transit_z <= sim.bounds.max[2]) || !(self.transit_z >= sim.shackle.pos[2]) {
            return Err(Error::Config(format!(
                "transit_z {} must lie between the shackle height and the workspace ceiling",
                self.transit_z
            )));
        }
        if !(self.shackle_approach >= 0.0) {
            return Err(Error::Config("shackle_approach must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pos: [f64; 3],
    pub jaws: Jaws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub points: [Waypoint; WAYPOINT_COUNT],
}

impl WaypointPath {
    /// Straight lift from `grasp`, up to transit height, across to above the
    /// shackle, down onto it, then open both jaws.
    pub fn rehang(grasp: [f64; 3], rt: &RuntimeConfig, sim: &SimConfig) -> Self {
        let clamp = |p| sim.bounds.clamp(p);
        let s = sim.shackle.pos;
        let z_t = rt.transit_z;
        let lift = [grasp[0], grasp[1], (grasp[2] + rt.lift_height).min(z_t)];
        let mid = [(grasp[0] + s[0]) / 2.0, (grasp[1] + s[1]) / 2.0, z_t];
        let closed = |pos| Waypoint {
            pos: clamp(pos),
            jaws: Jaws::CLOSED,
        };
        Self {
            points: [
                closed(lift),
                closed([grasp[0], grasp[1], z_t]),
                closed(mid),
                closed([s[0], s[1], z_t]),
                closed([s[0], s[1], s[2] + rt.shackle_approach]),
                closed(s),
                Waypoint {
                    pos: clamp(s),
                    jaws: Jaws::OPEN,
                },
            ],
        }
    }

    /// Sum of straight-line gaps from `start` through every waypoint.
    pub fn length_from(&self, start: [f64; 3]) -> f64 {
        let mut prev = start;
        let mut total = 0.0;
        for w in &self.points {
            total += dist3(prev, w.pos);
            prev = w.pos;
        }
        total
    }
}

/// Walks a [`WaypointPath`], advancing once the current point is reached.
#[derive(Debug, Clone)]
pub struct RehangExecutor {
    pub path: WaypointPath,
    pub index: usize,
    tol: f64,
}

impl RehangExecutor {
    pub fn new(path: WaypointPath, tol: f64) -> Self {
        Self { path, index: 0, tol }
    }

    pub fn next_action(&mut self, ee: [f64; 3]) -> Action {
        while self.index + 1 < WAYPOINT_COUNT && dist3(ee, self.path.points[self.index].pos) <= self.tol {
            self.index += 1;
        }
        let w = self.path.points[self.index];
        Action::new(w.pos, w.jaws)
    }
}
