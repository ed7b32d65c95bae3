//! Recording episodes as demonstrations, and open-loop replay.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::rng::{stream, trial_seed, Stream};
use crate::runtime::{run_episode, ActionSource, EpisodeLog, ExpertSource};
use crate::sim::{step, SimState};

use super::{DemoMeta, DemoSet, Demonstration, Frame, Source, DEMO_FORMAT_VERSION};

/// Convert a finished episode into a demonstration.
pub fn demo_from_episode(
    log: &EpisodeLog,
    source: Source,
    tick_rate: f64,
    created_at: u64,
) -> Demonstration {
    Demonstration {
        meta: DemoMeta {
            seed: log.seed,
            exemplar_id: log.spec.exemplar_id,
            source,
            tick_rate,
            created_at,
            format_version: DEMO_FORMAT_VERSION,
            carcass: log.spec,
        },
        frames: log
            .records
            .iter()
            .map(|r| Frame {
                tick: r.tick,
                obs: r.obs.clone(),
                action: r.action,
                mode: Some(r.mode),
            })
            .collect(),
    }
}

/// Run one episode with `source` and keep its frames as a demonstration.
pub fn record_episode(
    source: &dyn ActionSource,
    cfg: &Config,
    exemplar_id: u8,
    seed: u64,
    created_at: u64,
) -> Result<(Demonstration, EpisodeLog)> {
    let log = run_episode(source, cfg, exemplar_id, seed)?;
    let demo = demo_from_episode(&log, Source::Scripted, cfg.sim.tick_rate, created_at);
    Ok((demo, log))
}

/// Step the plant through the recorded actions, starting from the recorded
/// placement with the recorded seed. Returns every state, initial first.
pub fn replay_demo(demo: &Demonstration, cfg: &Config, seed: u64) -> Vec<SimState> {
    let spec = &demo.meta.carcass;
    let mut rng = stream(seed, Stream::Slip);
    let mut state = SimState::new(spec, &cfg.sim);
    let mut out = Vec::with_capacity(demo.frames.len() + 1);
    out.push(state.clone());
    for f in &demo.frames {
        state = step(&state, &f.action, spec, &cfg.sim, &mut rng);
        out.push(state.clone());
    }
    out
}

#[derive(Debug, Clone)]
pub struct GenSummary {
    pub set: DemoSet,
    pub attempts: usize,
}

impl GenSummary {
    pub fn retention(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.set.len() as f64 / self.attempts as f64
        }
    }
}

/// Record `n` successful scripted demonstrations, cycling through
/// `exemplars` so each gets an equal share. Failed attempts are discarded
/// and the next trial seed is tried.
pub fn generate_demos(
    n: usize,
    exemplars: &[u8],
    seed: u64,
    cfg: &Config,
    created_at: u64,
) -> Result<GenSummary> {
    if n == 0 || exemplars.is_empty() {
        return Err(Error::Config("need n ≥ 1 and at least one exemplar".into()));
    }
    let source = ExpertSource {
        config: cfg.expert.clone(),
    };
    let max_attempts = n.saturating_mul(20).max(100);
    let mut demos = Vec::with_capacity(n);
    let mut attempts = 0;
    while demos.len() < n {
        if attempts >= max_attempts {
            return Err(Error::Contract(format!(
                "only {} of {n} demonstrations succeeded after {attempts} attempts",
                demos.len()
            )));
        }
        let exemplar = exemplars[demos.len() % exemplars.len()];
        let s = trial_seed(seed, attempts as u64);
        attempts += 1;
        let (demo, log) = record_episode(&source, cfg, exemplar, s, created_at)?;
        if log.report.success {
            demos.push(demo);
        }
    }
    Ok(GenSummary {
        set: DemoSet::new(demos),
        attempts,
    })
}
