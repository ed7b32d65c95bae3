//! Scripted demonstrator with privileged access to the true leg positions.
//!
//! Stateless: every decision is a function of the plant state. The right
//! jaw is aligned and closed first; the end-effector then shifts so the left
//! jaw meets the left leg (dragging the held right leg along) and closes it.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sim::{dist2, jaw_center, CarcassSpec, Phase, SimConfig, SimState};
use crate::types::{Action, Jaws, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Std of the Gaussian perturbation on xy targets, meters.
    pub noise_sigma: f64,
    pub hover_z: f64,
    pub grasp_z: f64,
    /// Planar error below which the expert starts descending.
    pub align_tol: f64,
    /// Looser tolerance once descending, so jitter does not bounce it back up.
    pub descend_tol: f64,
    /// Height above `grasp_z` at which closing is allowed.
    pub close_slack: f64,
    /// A jaw closes once its offset is below `close_fraction · firm_fraction · ε`.
    pub close_fraction: f64,
    /// Extra lift above the success threshold.
    pub lift_margin: f64,
    /// Close both jaws together instead of right-then-left.
    pub simultaneous: bool,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.002,
            hover_z: 0.10,
            grasp_z: 0.012,
            align_tol: 0.008,
            descend_tol: 0.015,
            close_slack: 0.005,
            close_fraction: 0.5,
            lift_margin: 0.05,
            simultaneous: false,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.noise_sigma >= 0.0
            && self.hover_z > self.grasp_z
            && self.grasp_z >= 0.0
            && self.align_tol > 0.0
            && self.descend_tol >= self.align_tol
            && self.close_slack >= 0.0
            && self.close_fraction > 0.0
            && self.close_fraction <= 1.0
            && self.lift_margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid expert settings {self:?}")))
        }
    }
}

/// One expert action for `state`. Only valid before the rehang (phase
/// APPROACH or LIFTED).
pub fn scripted_expert(
    state: &SimState,
    spec: &CarcassSpec,
    cfg: &SimConfig,
    ecfg: &ExpertConfig,
    rng: &mut SimRng,
) -> Result<Action> {
    if !matches!(state.phase, Phase::Approach | Phase::Lifted) {
        return Err(Error::Contract(format!(
            "scripted expert called in phase {}",
            state.phase.as_str()
        )));
    }
    let noise = if ecfg.noise_sigma > 0.0 {
        let n = Normal::new(0.0, ecfg.noise_sigma).expect("validated sigma");
        [n.sample(rng), n.sample(rng)]
    } else {
        [0.0, 0.0]
    };
    let half = cfg.jaw_offset / 2.0;
    let [leg_l, leg_r] = [state.leg_xy(Side::L), state.leg_xy(Side::R)];
    // End-effector xy that centers each jaw on its leg.
    let ee_for_r = [leg_r[0] - half, leg_r[1]];
    let ee_for_l = [leg_l[0] + half, leg_l[1]];
    let close_tol = ecfg.close_fraction * spec.firm_fraction * cfg.capture_radius;

    let mut jaws = state.jaw_state;
    for side in Side::BOTH {
        if jaws.get(side) && !state.grasped[side.index()] {
            jaws.set(side, false);
        }
    }

    let ee = state.ee;
    let (goal, closing): ([f64; 2], &[Side]) = match state.grasped {
        [true, true] => {
            let z = cfg.capture_ceiling() + cfg.lift_threshold + ecfg.lift_margin;
            return Ok(Action::new([ee[0], ee[1], z], Jaws::CLOSED));
        }
        [false, false] if ecfg.simultaneous => (
            [(ee_for_r[0] + ee_for_l[0]) / 2.0, (ee_for_r[1] + ee_for_l[1]) / 2.0],
            &[Side::L, Side::R],
        ),
        [_, false] => (ee_for_r, &[Side::R]),
        [false, true] => (ee_for_l, &[Side::L]),
    };

    let err = dist2([ee[0], ee[1]], goal);
    let descending = ee[2] < ecfg.hover_z - 0.005;
    let tol = if descending { ecfg.descend_tol } else { ecfg.align_tol };
    let holding_one = state.grasped.iter().any(|g| *g);
    let z = if holding_one || err <= tol {
        ecfg.grasp_z
    } else {
        ecfg.hover_z
    };
    let target = [goal[0] + noise[0], goal[1] + noise[1], z];

    // Close only from a pose already at grasp height, so the decision is
    // visible in the observation rather than in the planned next pose.
    if ee[2] <= (ecfg.grasp_z + ecfg.close_slack).min(cfg.capture_ceiling()) {
        let aligned = |side: Side| dist2(jaw_center(ee, side, cfg), state.leg_xy(side)) < close_tol;
        if closing.iter().all(|s| aligned(*s)) {
            for s in closing {
                jaws.set(*s, true);
            }
            // Hold still while the jaw shuts.
            return Ok(Action::new(ee, jaws));
        }
    }
    Ok(Action::new(target, jaws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use crate::sim::step;

    fn spec(yaw: f64) -> CarcassSpec {
        CarcassSpec {
            exemplar_id: 1,
            leg_spacing: 0.14,
            leg_radius: 0.012,
            firm_fraction: 0.8,
            mass_scale: 1.0,
            init_center: [0.05, -0.03],
            init_yaw: yaw,
        }
    }

    #[test]
    fn rejects_terminal_phase() {
        let cfg = SimConfig::default();
        let mut s = SimState::new(&spec(0.0), &cfg);
        s.phase = Phase::Dropped;
        let err = scripted_expert(&s, &spec(0.0), &cfg, &ExpertConfig::default(), &mut stream(0, Stream::Expert));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn grasps_both_legs_right_first() {
        let cfg = SimConfig::default();
        let sp = spec(0.2);
        let ecfg = ExpertConfig::default();
        let mut s = SimState::new(&sp, &cfg);
        let mut erng = stream(1, Stream::Expert);
        let mut srng = stream(1, Stream::Slip);
        let mut right_first_tick = None;
        for _ in 0..100 {
            if s.both_grasped() {
                break;
            }
            let a = scripted_expert(&s, &sp, &cfg, &ecfg, &mut erng).unwrap();
            s = step(&s, &a, &sp, &cfg, &mut srng);
            if s.grasped[1] && right_first_tick.is_none() {
                assert!(!s.grasped[0]);
                right_first_tick = Some(s.tick);
            }
        }
        assert!(s.both_grasped());
        assert!(right_first_tick.unwrap() < s.tick);
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let cfg = SimConfig::default();
        let sp = spec(-0.1);
        let ecfg = ExpertConfig {
            noise_sigma: 0.0,
            ..ExpertConfig::default()
        };
        let run = |seed| {
            let mut s = SimState::new(&sp, &cfg);
            let mut erng = stream(seed, Stream::Expert);
            let mut srng = stream(3, Stream::Slip);
            let mut out = vec![];
            for _ in 0..40 {
                if s.phase != Phase::Approach {
                    break;
                }
                let a = scripted_expert(&s, &sp, &cfg, &ecfg, &mut erng).unwrap();
                s = step(&s, &a, &sp, &cfg, &mut srng);
                out.push(a);
            }
            out
        };
        assert_eq!(run(1), run(2));
    }
}
