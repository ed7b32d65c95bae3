//! Closed-loop episode execution with the one-way learned → scripted handoff.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::datasets::{scripted_expert, ExpertConfig, Mode};
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, Stream};
use crate::sim::{
    check_success, observe, sample_carcass, step, CarcassSpec, FailureStage, SimConfig, SimState,
    SuccessReport,
};
use crate::types::{Action, Observation, ObservationStack};

use super::detector::GraspDetector;
use super::valve::{ValveExchange, ValveLink};
use super::waypoints::{RehangExecutor, RuntimeConfig, WaypointPath};

/// Ground truth an action source may consult. Learned policies ignore it.
pub struct World<'a> {
    pub state: &'a SimState,
    pub spec: &'a CarcassSpec,
    pub sim: &'a SimConfig,
}

/// Anything that can drive the approach-and-grasp phase.
pub trait ActionSource: Sync {
    /// Observation stack depth the source expects.
    fn obs_horizon(&self) -> usize;

    /// Actions to execute next, in order; must not be empty.
    fn next_actions(
        &self,
        stack: &ObservationStack,
        world: &World<'_>,
        rng: &mut SimRng,
    ) -> Result<Vec<Action>>;
}

/// The scripted expert as an action source, re-planning every tick.
#[derive(Debug, Clone, Default)]
pub struct ExpertSource {
    pub config: ExpertConfig,
}

impl ActionSource for ExpertSource {
    fn obs_horizon(&self) -> usize {
        1
    }

    fn next_actions(
        &self,
        _stack: &ObservationStack,
        world: &World<'_>,
        rng: &mut SimRng,
    ) -> Result<Vec<Action>> {
        Ok(vec![scripted_expert(world.state, world.spec, world.sim, &self.config, rng)?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Tick at which the observation was taken and the action issued.
    pub tick: u64,
    pub obs: Observation,
    pub action: Action,
    /// Plant state after the action was applied.
    pub state: SimState,
    pub detector_count: u32,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub spec: CarcassSpec,
    pub initial: SimState,
    pub records: Vec<TickRecord>,
    pub transcript: Vec<ValveExchange>,
    /// Tick at which control passed to the scripted rehang, if it did.
    pub switch_tick: Option<u64>,
    pub report: SuccessReport,
}

impl EpisodeLog {
    pub fn states(&self) -> Vec<SimState> {
        std::iter::once(self.initial.clone())
            .chain(self.records.iter().map(|r| r.state.clone()))
            .collect()
    }

    pub fn final_state(&self) -> &SimState {
        self.records.last().map(|r| &r.state).unwrap_or(&self.initial)
    }
}

/// One episode advanced a tick at a time. Before the grasp detector fires
/// the caller supplies each action; afterwards the rehang path does.
pub struct Episode {
    sim: SimConfig,
    runtime: RuntimeConfig,
    spec: CarcassSpec,
    seed: u64,
    obs_rng: SimRng,
    slip_rng: SimRng,
    initial: SimState,
    state: SimState,
    obs: Observation,
    detector: GraspDetector,
    link: ValveLink,
    rehang: Option<RehangExecutor>,
    switch_tick: Option<u64>,
    records: Vec<TickRecord>,
}

impl Episode {
    pub fn new(cfg: &Config, spec: &CarcassSpec, seed: u64) -> Self {
        let sim = cfg.sim.clone();
        let mut obs_rng = stream(seed, Stream::ObsNoise);
        let initial = SimState::new(spec, &sim);
        let obs = observe(&initial, &sim, &mut obs_rng);
        Self {
            runtime: cfg.runtime.clone(),
            spec: *spec,
            seed,
            obs_rng,
            slip_rng: stream(seed, Stream::Slip),
            state: initial.clone(),
            initial,
            obs,
            detector: GraspDetector::new(),
            link: ValveLink::new(),
            rehang: None,
            switch_tick: None,
            records: Vec::new(),
            sim,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn spec(&self) -> &CarcassSpec {
        &self.spec
    }

    pub fn sim(&self) -> &SimConfig {
        &self.sim
    }

    /// Observation of the current state.
    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    /// Whether the scripted rehang has taken over.
    pub fn is_scripted(&self) -> bool {
        self.rehang.is_some()
    }

    /// Terminal phase reached or tick budget spent.
    pub fn is_done(&self) -> bool {
        self.state.phase.is_terminal() || self.state.tick >= self.runtime.max_ticks
    }

    /// Advance one tick. `action` drives the approach and is ignored once
    /// the rehang has taken over. Returns true on the tick the detector fires.
    pub fn step(&mut self, action: Option<Action>) -> Result<bool> {
        if self.is_done() {
            return Err(Error::Contract("episode already finished".into()));
        }
        let (action, mode) = match (self.rehang.as_mut(), action) {
            (Some(exec), _) => (exec.next_action(self.state.ee), Mode::Scripted),
            (None, Some(a)) => (a, Mode::Learned),
            (None, None) => return Err(Error::Contract("no action before the rehang handoff".into())),
        };
        self.link.command(self.state.tick, action.jaws)?;
        let next = step(&self.state, &action, &self.spec, &self.sim, &mut self.slip_rng);
        let fired = self.detector.update(next.jaw_state);
        self.records.push(TickRecord {
            tick: self.state.tick,
            obs: self.obs.clone(),
            action,
            state: next.clone(),
            detector_count: self.detector.consecutive_closed,
            mode,
        });
        self.state = next;
        self.obs = observe(&self.state, &self.sim, &mut self.obs_rng);
        if self.rehang.is_none() && fired {
            let path = WaypointPath::rehang(self.state.ee, &self.runtime, &self.sim);
            self.rehang = Some(RehangExecutor::new(path, self.runtime.waypoint_tol));
            self.switch_tick = Some(self.state.tick);
            return Ok(true);
        }
        Ok(false)
    }

    /// Close the episode and judge it. `sampling_failed` marks an episode
    /// abandoned because the policy could not produce an action.
    pub fn finish(self, sampling_failed: bool) -> Result<EpisodeLog> {
        let report = if sampling_failed {
            SuccessReport::failed(FailureStage::Grasp, self.state.tick, &self.sim)
        } else {
            let states: Vec<SimState> = std::iter::once(self.initial.clone())
                .chain(self.records.iter().map(|r| r.state.clone()))
                .collect();
            check_success(&states, &self.sim)?
        };
        Ok(EpisodeLog {
            seed: self.seed,
            spec: self.spec,
            initial: self.initial,
            records: self.records,
            transcript: self.link.transcript,
            switch_tick: self.switch_tick,
            report,
        })
    }
}

/// Place exemplar `exemplar_id` using `seed` and run one episode.
pub fn run_episode(
    source: &dyn ActionSource,
    cfg: &Config,
    exemplar_id: u8,
    seed: u64,
) -> Result<EpisodeLog> {
    let spec = sample_carcass(
        exemplar_id,
        &cfg.exemplars,
        &cfg.placement,
        &mut stream(seed, Stream::Placement),
    )?;
    run_episode_with_spec(source, cfg, &spec, seed)
}

pub fn run_episode_with_spec(
    source: &dyn ActionSource,
    cfg: &Config,
    spec: &CarcassSpec,
    seed: u64,
) -> Result<EpisodeLog> {
    let mut policy_rng = stream(seed, Stream::Policy);
    let mut ep = Episode::new(cfg, spec, seed);
    let mut stack = ObservationStack::new(source.obs_horizon(), ep.observation().clone())?;
    let mut queue: VecDeque<Action> = VecDeque::new();
    while !ep.is_done() {
        let action = if ep.is_scripted() {
            None
        } else {
            if queue.is_empty() {
                let world = World {
                    state: ep.state(),
                    spec,
                    sim: &cfg.sim,
                };
                match source.next_actions(&stack, &world, &mut policy_rng) {
                    Ok(actions) if !actions.is_empty() => queue.extend(actions),
                    Ok(_) => return Err(Error::Contract("action source returned no actions".into())),
                    Err(Error::SamplingFailed(msg)) => {
                        log::warn!("seed {seed}: sampling failed at tick {}: {msg}", ep.state().tick);
                        return ep.finish(true);
                    }
                    Err(e) => return Err(e),
                }
            }
            queue.pop_front()
        };
        if ep.step(action)? {
            queue.clear();
        }
        stack.push(ep.observation().clone());
    }
    ep.finish(false)
}
