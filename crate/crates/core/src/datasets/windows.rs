//! Fixed-length training windows cut from the learnable part of each demo.
//!
//! Every learnable frame starts exactly one window. The observation stack
//! reaches back `T_o - 1` frames (repeating the first frame at the start);
//! the action window reaches forward `T_p` frames (repeating the final
//! learnable action at the end). Windows never cross demonstrations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

use super::DemoSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub obs: Vec<Observation>,
    pub actions: Vec<Action>,
    pub demo_id: usize,
    pub start_tick: u64,
}

#[derive(Debug, Clone)]
pub struct WindowIndex {
    pairs: Vec<(usize, usize)>,
    obs_horizon: usize,
    pred_horizon: usize,
}

impl WindowIndex {
    pub fn new(set: &DemoSet, obs_horizon: usize, pred_horizon: usize) -> Result<Self> {
        if obs_horizon == 0 || pred_horizon == 0 {
            return Err(Error::Config("window horizons must be ≥ 1".into()));
        }
        let pairs = set
            .demos
            .iter()
            .enumerate()
            .flat_map(|(d, demo)| (0..demo.learnable().len()).map(move |s| (d, s)))
            .collect();
        Ok(Self {
            pairs,
            obs_horizon,
            pred_horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(demo, frame offset)` of window `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        self.pairs[i]
    }

    pub fn window(&self, set: &DemoSet, i: usize) -> TrainingWindow {
        let (d, s) = self.pairs[i];
        let frames = set.demos[d].learnable();
        let last = frames.len() - 1;
        let obs = (0..self.obs_horizon)
            .map(|k| {
                let back = self.obs_horizon - 1 - k;
                frames[s.saturating_sub(back)].obs.clone()
            })
            .collect();
        let actions = (0..self.pred_horizon)
            .map(|k| frames[(s + k).min(last)].action)
            .collect();
        TrainingWindow {
            obs,
            actions,
            demo_id: d,
            start_tick: frames[s].tick,
        }
    }

    /// `batch` windows drawn uniformly (with replacement) over all valid starts.
    pub fn sample(&self, set: &DemoSet, batch: usize, rng: &mut SimRng) -> Result<Vec<TrainingWindow>> {
        if self.pairs.is_empty() {
            return Err(Error::Contract("no training windows available".into()));
        }
        Ok((0..batch)
            .map(|_| self.window(set, rng.random_range(0..self.pairs.len())))
            .collect())
    }
}

pub fn sample_windows(
    set: &DemoSet,
    obs_horizon: usize,
    pred_horizon: usize,
    batch: usize,
    rng: &mut SimRng,
) -> Result<Vec<TrainingWindow>> {
    WindowIndex::new(set, obs_horizon, pred_horizon)?.sample(set, batch, rng)
}
