//! Kinematic dual-jaw plant: end-effector motion, independent jaw capture of
//! the two legs, a slip model, lift and rehang mechanics.
//!
//! Each [`step`] applies, in order: end-effector motion under a per-tick
//! displacement clamp, the delayed jaw valve update, releases, captures,
//! slip, lift, and the phase transition.

mod carcass;
mod render;
mod success;

use std::collections::VecDeque;

use rand_distr::{Distribution, Normal};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Jaws, Observation, Side, WorkspaceBounds};

pub use carcass::{sample_carcass, CarcassSpec, ExemplarProfile, PlacementConfig};
pub use render::render_topdown;
pub use success::{check_success, FailureStage, SuccessReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Approach,
    Lifted,
    Rehung,
    Dropped,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Rehung | Phase::Dropped)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Approach => "APPROACH",
            Phase::Lifted => "LIFTED",
            Phase::Rehung => "REHUNG",
            Phase::Dropped => "DROPPED",
        }
    }

    fn rank(self) -> u8 {
        match self {
            Phase::Approach => 0,
            Phase::Lifted => 1,
            Phase::Rehung | Phase::Dropped => 2,
        }
    }

    /// Whether `next` may follow `self` along APPROACH → LIFTED → {REHUNG | DROPPED}.
    pub fn may_precede(self, next: Phase) -> bool {
        self == next || (!self.is_terminal() && next.rank() > self.rank())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShacklePose {
    pub pos: [f64; 3],
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub tick_rate: f64,
    /// Euclidean displacement limit per tick, meters.
    pub max_step_disp: f64,
    pub capture_radius: f64,
    /// A jaw can capture only while the end-effector is at most this high above the table.
    pub capture_height: f64,
    /// Lateral distance between jaw centers.
    pub jaw_offset: f64,
    pub jaw_latency: usize,
    pub obs_noise_sigma: f64,
    pub lift_threshold: f64,
    pub table_z: f64,
    pub shackle: ShacklePose,
    pub init_ee: [f64; 3],
    pub bounds: WorkspaceBounds,
    pub image_mode: bool,
    pub image_size: usize,
    /// Half-width of the square table region covered by the rendered image.
    pub image_half_extent: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_rate: 10.0,
            max_step_disp: 0.02,
            capture_radius: 0.02,
            capture_height: 0.03,
            jaw_offset: 0.14,
            jaw_latency: 1,
            obs_noise_sigma: 0.003,
            lift_threshold: 0.05,
            table_z: 0.0,
            shackle: ShacklePose {
                pos: [0.0, -0.35, 0.45],
                tolerance: 0.02,
            },
            init_ee: [0.0, 0.0, 0.3],
            bounds: WorkspaceBounds::default(),
            image_mode: false,
            image_size: 32,
            image_half_extent: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        let positive = [
            ("tick_rate", self.tick_rate),
            ("max_step_disp", self.max_step_disp),
            ("capture_radius", self.capture_radius),
            ("capture_height", self.capture_height),
            ("jaw_offset", self.jaw_offset),
            ("lift_threshold", self.lift_threshold),
            ("shackle.tolerance", self.shackle.tolerance),
            ("image_half_extent", self.image_half_extent),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.obs_noise_sigma >= 0.0) {
            return Err(Error::Config("obs_noise_sigma must be non-negative".into()));
        }
        if self.jaw_latency == 0 {
            return Err(Error::Config("jaw_latency must be at least 1 tick".into()));
        }
        if self.image_size == 0 {
            return Err(Error::Config("image_size must be positive".into()));
        }
        if !self.bounds.contains(self.init_ee) || !self.bounds.contains(self.shackle.pos) {
            return Err(Error::Config("init_ee and shackle must lie inside the workspace".into()));
        }
        Ok(())
    }

    pub fn capture_ceiling(&self) -> f64 {
        self.table_z + self.capture_height
    }

    pub fn at_shackle(&self, ee: [f64; 3]) -> bool {
        dist3(ee, self.shackle.pos) <= self.shackle.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub ee: [f64; 3],
    /// Actual (post-latency) jaw positions.
    pub jaw_state: Jaws,
    /// Commands issued but not yet actuated, oldest first.
    pub jaw_cmd_pending: VecDeque<Jaws>,
    /// `[left, right]` leg positions; z is the carcass lift height.
    pub legs: [[f64; 3]; 2],
    pub leg_radius: f64,
    pub grasped: [bool; 2],
    /// Leg position relative to its jaw center, fixed at capture.
    pub grasp_offset: [[f64; 2]; 2],
    pub slip_events: u32,
    pub carcass_z: f64,
    pub phase: Phase,
    pub tick: u64,
}

impl SimState {
    pub fn new(spec: &CarcassSpec, cfg: &SimConfig) -> Self {
        let [l, r] = spec.leg_positions();
        Self {
            ee: cfg.bounds.clamp(cfg.init_ee),
            jaw_state: Jaws::OPEN,
            jaw_cmd_pending: VecDeque::new(),
            legs: [[l[0], l[1], 0.0], [r[0], r[1], 0.0]],
            leg_radius: spec.leg_radius,
            grasped: [false; 2],
            grasp_offset: [[0.0; 2]; 2],
            slip_events: 0,
            carcass_z: 0.0,
            phase: Phase::Approach,
            tick: 0,
        }
    }

    pub fn both_grasped(&self) -> bool {
        self.grasped[0] && self.grasped[1]
    }

    pub fn leg_xy(&self, side: Side) -> [f64; 2] {
        let l = self.legs[side.index()];
        [l[0], l[1]]
    }

    /// Distance from the jaw center on `side` to its leg, in the table plane.
    pub fn jaw_leg_offset(&self, side: Side, cfg: &SimConfig) -> f64 {
        dist2(jaw_center(self.ee, side, cfg), self.leg_xy(side))
    }
}

/// Center of the jaw on `side`: the end-effector offset by ∓w/2 along x.
pub fn jaw_center(ee: [f64; 3], side: Side, cfg: &SimConfig) -> [f64; 2] {
    let half = cfg.jaw_offset / 2.0;
    match side {
        Side::L => [ee[0] - half, ee[1]],
        Side::R => [ee[0] + half, ee[1]],
    }
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Move `from` toward `to` by at most `max` (Euclidean).
pub fn clamp_displacement(from: [f64; 3], to: [f64; 3], max: f64) -> [f64; 3] {
    let d = dist3(from, to);
    if d <= max {
        return to;
    }
    let k = max / d;
    std::array::from_fn(|i| from[i] + (to[i] - from[i]) * k)
}

/// Per-tick slip probability for a grasp at planar `offset`.
pub fn slip_probability(offset: f64, capture_radius: f64, firm_fraction: f64) -> f64 {
    let ratio = offset / capture_radius;
    if ratio <= firm_fraction || firm_fraction >= 1.0 {
        return 0.0;
    }
    ((ratio - firm_fraction) / (1.0 - firm_fraction)).min(1.0)
}

/// Advance the plant by one tick. Non-finite action components hold the
/// current position on that axis.
pub fn step(
    state: &SimState,
    action: &Action,
    spec: &CarcassSpec,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> SimState {
    let mut s = state.clone();
    s.tick += 1;

    let target: [f64; 3] =
        std::array::from_fn(|i| if action.pos[i].is_finite() { action.pos[i] } else { s.ee[i] });
    s.ee = clamp_displacement(s.ee, cfg.bounds.clamp(target), cfg.max_step_disp);

    let before = s.jaw_state;
    s.jaw_cmd_pending.push_back(action.jaws);
    while s.jaw_cmd_pending.len() >= cfg.jaw_latency {
        s.jaw_state = s.jaw_cmd_pending.pop_front().expect("non-empty queue");
    }

    if s.phase.is_terminal() {
        return s;
    }

    release(&mut s, before, cfg);
    if s.phase.is_terminal() {
        return s;
    }
    capture(&mut s, before, cfg);
    follow_jaws(&mut s, cfg);
    slip_update(&mut s, spec, cfg, rng);
    if s.phase.is_terminal() {
        return s;
    }

    if s.grasped.iter().any(|g| *g) {
        s.carcass_z = (s.ee[2] - cfg.capture_ceiling()).max(0.0);
    } else {
        s.carcass_z = 0.0;
    }
    for leg in &mut s.legs {
        leg[2] = s.carcass_z;
    }
    if s.phase == Phase::Approach && s.both_grasped() && s.carcass_z >= cfg.lift_threshold {
        s.phase = Phase::Lifted;
    }
    s
}

fn release(s: &mut SimState, before: Jaws, cfg: &SimConfig) {
    let mut released = false;
    for side in Side::BOTH {
        let i = side.index();
        if before.get(side) && !s.jaw_state.get(side) && s.grasped[i] {
            s.grasped[i] = false;
            released = true;
        }
    }
    if !released {
        return;
    }
    let any_held = s.grasped.iter().any(|g| *g);
    if any_held {
        // A single remaining grasp is handled by the slip rule.
        return;
    }
    if s.phase == Phase::Lifted && cfg.at_shackle(s.ee) {
        s.phase = Phase::Rehung;
        drop_to_table(s);
    } else if s.phase == Phase::Lifted || s.carcass_z > cfg.lift_threshold / 2.0 {
        s.phase = Phase::Dropped;
        drop_to_table(s);
    } else {
        drop_to_table(s);
    }
}

fn capture(s: &mut SimState, before: Jaws, cfg: &SimConfig) {
    if s.ee[2] > cfg.capture_ceiling() {
        return;
    }
    for side in Side::BOTH {
        let i = side.index();
        if before.get(side) || !s.jaw_state.get(side) || s.grasped[i] {
            continue;
        }
        let jc = jaw_center(s.ee, side, cfg);
        let leg = s.leg_xy(side);
        if dist2(jc, leg) <= cfg.capture_radius {
            s.grasped[i] = true;
            s.grasp_offset[i] = [leg[0] - jc[0], leg[1] - jc[1]];
        }
    }
}

/// Grasped legs move rigidly with their jaw; free legs stay put.
fn follow_jaws(s: &mut SimState, cfg: &SimConfig) {
    for side in Side::BOTH {
        let i = side.index();
        if s.grasped[i] {
            let jc = jaw_center(s.ee, side, cfg);
            s.legs[i][0] = jc[0] + s.grasp_offset[i][0];
            s.legs[i][1] = jc[1] + s.grasp_offset[i][1];
        }
    }
}

/// Slip rule, evaluated against the lift height reached on the previous tick.
pub fn slip_update(s: &mut SimState, spec: &CarcassSpec, cfg: &SimConfig, rng: &mut SimRng) {
    if s.carcass_z <= 0.0 {
        return;
    }
    let held = s.grasped.iter().filter(|g| **g).count();
    if held == 1 && s.carcass_z > cfg.lift_threshold / 2.0 {
        s.slip_events += 1;
        s.phase = Phase::Dropped;
        s.grasped = [false; 2];
        drop_to_table(s);
        return;
    }
    if held == 2 {
        for i in 0..2 {
            let off = s.grasp_offset[i][0].hypot(s.grasp_offset[i][1]);
            let p = slip_probability(off, cfg.capture_radius, spec.firm_fraction);
            if p > 0.0 && rng.random::<f64>() < p {
                s.grasped[i] = false;
                s.slip_events += 1;
            }
        }
        if !s.grasped.iter().any(|g| *g) {
            s.phase = Phase::Dropped;
            drop_to_table(s);
        }
    }
}

fn drop_to_table(s: &mut SimState) {
    s.carcass_z = 0.0;
    for leg in &mut s.legs {
        leg[2] = 0.0;
    }
}

/// Sensor reading of `state`: noisy legs in state mode, a rendered raster in image mode.
pub fn observe(state: &SimState, cfg: &SimConfig, rng: &mut SimRng) -> Observation {
    let (legs, image) = if cfg.image_mode {
        (None, Some(render_topdown(state, cfg)))
    } else {
        let mut legs = [state.leg_xy(Side::L), state.leg_xy(Side::R)];
        if cfg.obs_noise_sigma > 0.0 {
            let n = Normal::new(0.0, cfg.obs_noise_sigma).expect("validated sigma");
            for v in legs.iter_mut().flatten() {
                *v += n.sample(rng);
            }
        }
        (Some(legs), None)
    };
    Observation {
        ee: state.ee,
        jaws: state.jaw_state,
        legs,
        lifted_z: state.carcass_z,
        image,
    }
}
