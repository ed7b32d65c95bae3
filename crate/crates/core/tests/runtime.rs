use chicgrasp_core::datasets::{ExpertConfig, Mode};
use chicgrasp_core::rng::{trial_seed, SimRng};
use chicgrasp_core::runtime::{
    detector_update, run_episode, run_episode_with_spec, ActionSource, ExpertSource, GraspDetector,
    World, WaypointPath, DETECTOR_FRAMES, WAYPOINT_COUNT,
};
use chicgrasp_core::sim::{CarcassSpec, FailureStage, Phase};
use chicgrasp_core::types::{Action, Jaws, ObservationStack};
use chicgrasp_core::{Config, Error, Result};
use proptest::prelude::*;

/// Reference rule: frame `i` fires iff it and the two before it are all (1,1).
fn brute_force(frames: &[(bool, bool)], i: usize) -> bool {
    i + 1 >= DETECTOR_FRAMES as usize
        && frames[i + 1 - DETECTOR_FRAMES as usize..=i].iter().all(|&(l, r)| l && r)
}

#[test]
fn detector_matches_enumeration_of_all_ten_frame_sequences() {
    let mut frames = [(false, false); 10];
    for code in 0u32..(1 << 20) {
        for (i, f) in frames.iter_mut().enumerate() {
            let pair = (code >> (2 * i)) & 3;
            *f = (pair & 1 == 1, pair & 2 == 2);
        }
        let mut det = GraspDetector::new();
        for i in 0..frames.len() {
            let (next, fired) = detector_update(det, Jaws::new(frames[i].0, frames[i].1));
            det = next;
            assert_eq!(fired, brute_force(&frames, i), "code {code:#x} frame {i}");
        }
    }
}

/// Moves straight to a fixed target, then closes both jaws once there.
struct GoAndClose {
    target: [f64; 3],
    close_after: Option<u64>,
}

impl ActionSource for GoAndClose {
    fn obs_horizon(&self) -> usize {
        1
    }

    fn next_actions(&self, _: &ObservationStack, world: &World<'_>, _: &mut SimRng) -> Result<Vec<Action>> {
        let arrived = world.state.ee.iter().zip(&self.target).all(|(a, b)| (a - b).abs() < 1e-9);
        let close = arrived && self.close_after.is_some_and(|t| world.state.tick >= t);
        Ok(vec![Action::new(self.target, if close { Jaws::CLOSED } else { Jaws::OPEN })])
    }
}

/// Replays a fixed jaw script while holding still.
struct JawScript(Vec<Jaws>);

impl ActionSource for JawScript {
    fn obs_horizon(&self) -> usize {
        2
    }

    fn next_actions(&self, _: &ObservationStack, world: &World<'_>, _: &mut SimRng) -> Result<Vec<Action>> {
        let jaws = self.0.get(world.state.tick as usize).copied().unwrap_or(Jaws::OPEN);
        Ok(vec![Action::new(world.state.ee, jaws)])
    }
}

struct Broken;

impl ActionSource for Broken {
    fn obs_horizon(&self) -> usize {
        1
    }

    fn next_actions(&self, _: &ObservationStack, _: &World<'_>, _: &mut SimRng) -> Result<Vec<Action>> {
        Err(Error::SamplingFailed("non-finite sample".into()))
    }
}

/// Legs along x, centred at the origin, `spacing` apart.
fn aligned_spec(cfg: &Config, spacing: f64) -> CarcassSpec {
    let ex = &cfg.exemplars[0];
    CarcassSpec {
        exemplar_id: ex.id,
        leg_spacing: spacing,
        leg_radius: ex.leg_radius,
        firm_fraction: ex.firm_fraction,
        mass_scale: ex.mass_scale,
        init_center: [0.0, 0.0],
        init_yaw: 0.0,
    }
}

fn grasp_height(cfg: &Config) -> f64 {
    cfg.sim.table_z + cfg.sim.capture_height / 2.0
}

#[test]
fn expert_as_source_completes_a_nominal_episode() {
    let cfg = Config::default();
    let src = ExpertSource::default();
    let log = run_episode(&src, &cfg, 1, trial_seed(0, 0)).unwrap();
    assert!(log.report.success, "{:?}", log.report);
    assert_eq!(log.final_state().phase, Phase::Rehung);
    assert!(log.switch_tick.is_some());
    assert!(log.records.iter().any(|r| r.mode == Mode::Scripted));
}

#[test]
fn never_closing_source_times_out_at_grasp() {
    let cfg = Config::default();
    let src = GoAndClose {
        target: [0.0, 0.0, grasp_height(&cfg)],
        close_after: None,
    };
    let log = run_episode(&src, &cfg, 2, 5).unwrap();
    assert_eq!(log.records.len() as u64, cfg.runtime.max_ticks);
    assert_eq!(log.switch_tick, None);
    assert!(!log.report.success);
    assert_eq!(log.report.failure_stage, FailureStage::Grasp);
    assert!(log.transcript.is_empty());
}

#[test]
fn two_closed_frames_then_open_do_not_switch() {
    let cfg = Config::default();
    let c = Jaws::CLOSED;
    let o = Jaws::OPEN;
    let log = run_episode(&JawScript(vec![c, c, o, c, c, o]), &cfg, 1, 3).unwrap();
    assert_eq!(log.switch_tick, None);
    assert!(log.records.iter().all(|r| r.mode == Mode::Learned));
    assert!(log.records.iter().all(|r| r.detector_count < DETECTOR_FRAMES));

    let log = run_episode(&JawScript(vec![c, c, c]), &cfg, 1, 3).unwrap();
    assert_eq!(log.switch_tick, Some(3));
}

#[test]
fn sampling_failure_marks_grasp_stage() {
    let cfg = Config::default();
    let log = run_episode(&Broken, &cfg, 1, 9).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(log.report.failure_stage, FailureStage::Grasp);
}

#[test]
fn zero_offset_grasp_is_rehung() {
    let cfg = Config::default();
    let spec = aligned_spec(&cfg, cfg.sim.jaw_offset);
    let src = GoAndClose {
        target: [0.0, 0.0, grasp_height(&cfg)],
        close_after: Some(0),
    };
    for seed in 0..20 {
        let log = run_episode_with_spec(&src, &cfg, &spec, seed).unwrap();
        assert_eq!(log.final_state().phase, Phase::Rehung, "seed {seed}");
        assert!(log.report.success);
        assert_eq!(log.final_state().slip_events, 0);
    }
}

#[test]
fn one_leg_grasp_drops_during_lift() {
    let cfg = Config::default();
    // Right jaw sits on the right leg; the left leg is well beyond capture reach.
    let spacing = cfg.sim.jaw_offset + 4.0 * cfg.sim.capture_radius;
    let spec = aligned_spec(&cfg, spacing);
    let x = spacing / 2.0 - cfg.sim.jaw_offset / 2.0;
    let src = GoAndClose {
        target: [x, 0.0, grasp_height(&cfg)],
        close_after: Some(0),
    };
    let log = run_episode_with_spec(&src, &cfg, &spec, 1).unwrap();
    let switch = log.switch_tick.expect("detector fires on closed jaws");
    let at_switch = &log.records[switch as usize - 1].state;
    assert_eq!(at_switch.grasped, [false, true]);
    assert_eq!(log.final_state().phase, Phase::Dropped);
    assert_eq!(log.final_state().slip_events, 1);
    // No two-leg clamp ever existed, so the failure is charged to the grasp.
    assert_eq!(log.report.failure_stage, FailureStage::Grasp);
}

#[test]
fn traversed_path_matches_waypoint_gaps() {
    let cfg = Config::default();
    let spec = aligned_spec(&cfg, cfg.sim.jaw_offset);
    let src = GoAndClose {
        target: [0.0, 0.0, grasp_height(&cfg)],
        close_after: Some(0),
    };
    let log = run_episode_with_spec(&src, &cfg, &spec, 0).unwrap();
    let switch = log.switch_tick.unwrap() as usize;
    let states = log.states();
    let start = states[switch].ee;
    let path = WaypointPath::rehang(start, &cfg.runtime, &cfg.sim);
    let travelled: f64 = states[switch..]
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].ee, w[1].ee);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .sum();
    let expected = path.length_from(start);
    // Corner cutting is bounded by the arrival tolerance at each waypoint.
    let slack = 2.0 * WAYPOINT_COUNT as f64 * cfg.runtime.waypoint_tol;
    assert!(travelled <= expected + 1e-9, "{travelled} vs {expected}");
    assert!(expected - travelled <= slack, "{travelled} vs {expected}");
}

fn check_log_invariants(log: &chicgrasp_core::runtime::EpisodeLog) {
    // One-way handoff at the detector firing tick.
    let first_scripted = log.records.iter().position(|r| r.mode == Mode::Scripted);
    if let Some(k) = first_scripted {
        assert!(log.records[k..].iter().all(|r| r.mode == Mode::Scripted));
        assert_eq!(Some(log.records[k].tick), log.switch_tick);
        assert_eq!(log.records[k - 1].detector_count, DETECTOR_FRAMES);
        assert!(log.records[..k - 1].iter().all(|r| r.detector_count < DETECTOR_FRAMES));
    } else {
        assert!(log.switch_tick.is_none() || log.switch_tick == Some(log.records.len() as u64));
    }
    // Every commanded jaw change shows up on the wire, in order.
    let mut prev = Jaws::OPEN;
    let mut expected = Vec::new();
    for r in &log.records {
        for (side, name) in [(chicgrasp_core::types::Side::L, 'L'), (chicgrasp_core::types::Side::R, 'R')] {
            let bit = r.action.jaws.get(side);
            if bit != prev.get(side) {
                expected.push((r.tick, format!("{name}{}\n", bit as u8)));
            }
        }
        prev = r.action.jaws;
    }
    let wire: Vec<_> = log.transcript.iter().map(|e| (e.tick, e.frame.clone())).collect();
    assert_eq!(wire, expected);
    for e in &log.transcript {
        assert_eq!(e.ack, format!("ACK {}", e.frame));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expert_logs_keep_runtime_invariants(seed in any::<u64>(), exemplar in 1u8..=3, simultaneous in any::<bool>()) {
        let cfg = Config::default();
        let src = ExpertSource { config: ExpertConfig { simultaneous, ..ExpertConfig::default() } };
        let log = run_episode(&src, &cfg, exemplar, seed).unwrap();
        check_log_invariants(&log);
        prop_assert!(log.records.len() as u64 <= cfg.runtime.max_ticks);
    }

    #[test]
    fn random_jaw_scripts_keep_runtime_invariants(bits in proptest::collection::vec(0u8..4, 0..60), seed in any::<u64>()) {
        let cfg = Config::default();
        let script = bits.iter().map(|b| Jaws::new(b & 1 == 1, b & 2 == 2)).collect();
        let log = run_episode(&JawScript(script), &cfg, 1, seed).unwrap();
        check_log_invariants(&log);
    }
}
