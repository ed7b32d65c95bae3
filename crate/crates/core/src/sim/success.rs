//! Episode success judgment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Phase, SimConfig, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureStage {
    None,
    Grasp,
    LiftSlip,
    Rehang,
}

impl FailureStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureStage::None => "NONE",
            FailureStage::Grasp => "GRASP",
            FailureStage::LiftSlip => "LIFT_SLIP",
            FailureStage::Rehang => "REHANG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub success: bool,
    pub failure_stage: FailureStage,
    pub ticks_elapsed: u64,
    pub cycle_seconds: f64,
}

impl SuccessReport {
    pub fn failed(stage: FailureStage, ticks_elapsed: u64, cfg: &SimConfig) -> Self {
        Self {
            success: false,
            failure_stage: stage,
            ticks_elapsed,
            cycle_seconds: ticks_elapsed as f64 / cfg.tick_rate,
        }
    }
}

/// Judge an episode from its sequence of plant states (initial state first).
///
/// Success needs a simultaneous two-leg clamp, a lift of at least
/// `lift_threshold` with no slip, and a final REHUNG phase. Failures are
/// attributed to the earliest unmet condition; a two-leg clamp that never
/// reaches the lift threshold counts as a grasp failure.
pub fn check_success(log: &[SimState], cfg: &SimConfig) -> Result<SuccessReport> {
    let (first, last) = match (log.first(), log.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidLog("episode log is empty".into())),
    };
    let ticks = last.tick - first.tick;
    let both_clamped = log.iter().any(|s| s.both_grasped());
    let max_lift = log.iter().map(|s| s.carcass_z).fold(0.0, f64::max);
    let slips = last.slip_events;

    let stage = if !both_clamped {
        FailureStage::Grasp
    } else if slips > 0 {
        FailureStage::LiftSlip
    } else if max_lift < cfg.lift_threshold {
        FailureStage::Grasp
    } else if last.phase != Phase::Rehung {
        FailureStage::Rehang
    } else {
        FailureStage::None
    };
    Ok(SuccessReport {
        success: stage == FailureStage::None,
        failure_stage: stage,
        ticks_elapsed: ticks,
        cycle_seconds: ticks as f64 / cfg.tick_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::CarcassSpec;

    fn base() -> SimState {
        let spec = CarcassSpec {
            exemplar_id: 1,
            leg_spacing: 0.14,
            leg_radius: 0.012,
            firm_fraction: 0.8,
            mass_scale: 1.0,
            init_center: [0.0, 0.0],
            init_yaw: 0.0,
        };
        SimState::new(&spec, &SimConfig::default())
    }

    fn episode(max_lift: f64, slips: u32, last_phase: Phase) -> Vec<SimState> {
        let s0 = base();
        let mut lifted = s0.clone();
        lifted.tick = 30;
        lifted.grasped = [true, true];
        lifted.carcass_z = max_lift;
        lifted.phase = Phase::Lifted;
        let mut end = lifted.clone();
        end.tick = 80;
        end.grasped = [false, false];
        end.carcass_z = 0.0;
        end.slip_events = slips;
        end.phase = last_phase;
        vec![s0, lifted, end]
    }

    #[test]
    fn rehung_without_slip_succeeds() {
        let r = check_success(&episode(0.30, 0, Phase::Rehung), &SimConfig::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.failure_stage, FailureStage::None);
        assert_eq!(r.ticks_elapsed, 80);
        assert!((r.cycle_seconds - 8.0).abs() < 1e-12);
    }

    #[test]
    fn lift_just_below_threshold() {
        let r = check_success(&episode(0.049, 0, Phase::Rehung), &SimConfig::default()).unwrap();
        assert!(!r.success);
        assert_ne!(r.failure_stage, FailureStage::LiftSlip);
        assert_eq!(r.failure_stage, FailureStage::Grasp);
    }

    #[test]
    fn slip_and_rehang_failures() {
        let cfg = SimConfig::default();
        let r = check_success(&episode(0.3, 1, Phase::Dropped), &cfg).unwrap();
        assert_eq!(r.failure_stage, FailureStage::LiftSlip);
        let r = check_success(&episode(0.3, 0, Phase::Dropped), &cfg).unwrap();
        assert_eq!(r.failure_stage, FailureStage::Rehang);
        let r = check_success(&[base()], &cfg).unwrap();
        assert_eq!(r.failure_stage, FailureStage::Grasp);
    }

    #[test]
    fn empty_log_rejected() {
        assert!(matches!(
            check_success(&[], &SimConfig::default()),
            Err(Error::InvalidLog(_))
        ));
    }
}
