//! Minibatch training with Adam and optional cosine learning-rate decay.

use std::f64::consts::PI;

use chicgrasp_nn::{adam_step, AdamConfig, AdamState, Graph};
use rand::seq::SliceRandom;

use crate::datasets::{compute_norm_stats, DemoSet, WindowIndex};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::sim::SimConfig;

use super::batch::{window_batch, Batch};
use super::model::{LossNoise, PolicyModel};
use super::{PolicyConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    /// Log-stds clamped at the floor during the epoch (LSTM-GMM only).
    pub clamped: usize,
}

/// Owns a model and its optimizer state.
pub struct Trainer {
    pub model: PolicyModel,
    adam: AdamState,
}

impl Trainer {
    pub fn new(model: PolicyModel, lr: f64) -> Self {
        let adam = AdamState::new(
            &model.params,
            AdamConfig {
                lr: lr as f32,
                ..AdamConfig::default()
            },
        );
        Self { model, adam }
    }

    pub fn steps_taken(&self) -> u64 {
        self.adam.step
    }

    /// One Adam step on `batch`; returns the pre-update loss and the clamp count.
    pub fn step(&mut self, batch: &Batch, noise: &LossNoise, lr: f64) -> Result<(f64, usize)> {
        let mut g = Graph::<f32>::new();
        let pv = self.model.params.bind(&mut g);
        let (loss, clamped) = self.model.loss(&mut g, &pv, batch, noise)?;
        let value = g.value(loss).item() as f64;
        if !value.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "loss became {value} at step {}",
                self.adam.step
            )));
        }
        let mut grads = g.backward(loss)?;
        let grads = self.model.params.collect_grads(&pv, &mut grads);
        self.adam.config.lr = lr as f32;
        adam_step(&mut self.model.params, &grads, &mut self.adam)?;
        Ok((value, clamped))
    }
}

pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    0.5 * base * (1.0 + (PI * step as f64 / total as f64).cos())
}

/// Train a fresh `pcfg.algo` policy on `set`. `on_epoch` sees each epoch's
/// statistics as soon as it finishes.
pub fn train_policy(
    set: &DemoSet,
    pcfg: &PolicyConfig,
    tcfg: &TrainConfig,
    sim: &SimConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(PolicyModel, Vec<EpochStats>)> {
    pcfg.validate()?;
    tcfg.validate()?;
    let norm = compute_norm_stats(set)?;
    let image = sim.image_mode.then_some(sim.image_size);
    let model = PolicyModel::new(pcfg.clone(), norm, image, tcfg.seed)?;
    let index = WindowIndex::new(set, pcfg.obs_horizon, pcfg.pred_horizon)?;
    if index.is_empty() {
        return Err(Error::Contract("dataset has no learnable frames".into()));
    }
    let windows: Vec<_> = (0..index.len()).map(|i| index.window(set, i)).collect();
    let all = window_batch(&windows, &model.norm, model.grid())?;
    drop(windows);

    let batch = tcfg.batch_for(pcfg.algo).min(all.n);
    let per_epoch = all.n.div_ceil(batch);
    let total = per_epoch * tcfg.epochs;
    let mut rng = stream(tcfg.seed, Stream::Training);
    let mut trainer = Trainer::new(model, tcfg.lr);
    let mut order: Vec<usize> = (0..all.n).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut step = 0;
    for epoch in 0..tcfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut clamped = 0;
        let mut lr = tcfg.lr;
        for chunk in order.chunks(batch) {
            lr = if tcfg.cosine_decay {
                cosine_lr(tcfg.lr, step, total)
            } else {
                tcfg.lr
            };
            let b = all.select(chunk);
            let noise = trainer.model.draw_noise(b.n, &mut rng);
            let (loss, cl) = trainer.step(&b, &noise, lr)?;
            sum += loss;
            clamped += cl;
            step += 1;
        }
        let stats = EpochStats {
            epoch,
            loss: sum / per_epoch as f64,
            lr,
            clamped,
        };
        if clamped > 0 {
            log::info!("epoch {epoch}: {clamped} log-std values clamped at the floor");
        }
        on_epoch(&stats);
        history.push(stats);
    }
    Ok((trainer.model, history))
}
