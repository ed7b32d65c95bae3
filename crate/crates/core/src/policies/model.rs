//! A trained (or freshly initialized) policy of any algorithm, with its
//! normalization statistics.

use chicgrasp_nn::{Graph, ParamStore, Scalar, Var};
use serde::{Deserialize, Serialize};

use crate::datasets::NormStats;
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, Stream};
use crate::runtime::{ActionSource, World};
use crate::types::{threshold_jaws, Action, Observation, ObservationStack, RawAction, ACT_DIM};

use super::batch::{obs_batch, Batch, PatchGrid};
use super::diffusion::{DiffusionNet, DiffusionNoise};
use super::ibc::{uniform_box, IbcNet};
use super::lstm_gmm::LstmGmmNet;
use super::{Algo, PolicyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Net {
    Diffusion(DiffusionNet),
    LstmGmm(LstmGmmNet),
    Ibc(IbcNet),
}

/// Randomness consumed by one training-loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum LossNoise {
    Diffusion(DiffusionNoise),
    LstmGmm,
    /// `[n·n_neg, window]` uniform counter-examples.
    Ibc(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub config: PolicyConfig,
    pub norm: NormStats,
    /// Rendered image side length in image mode.
    pub image: Option<usize>,
    pub params: ParamStore,
    pub net: Net,
}

impl PolicyModel {
    pub(crate) fn build(
        config: &PolicyConfig,
        image: Option<usize>,
        rng: &mut SimRng,
    ) -> Result<(ParamStore, Net)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let net = match config.algo {
            Algo::Diffusion => Net::Diffusion(DiffusionNet::new(&mut store, config, image, rng)?),
            Algo::LstmGmm => Net::LstmGmm(LstmGmmNet::new(&mut store, config, image, rng)?),
            Algo::Ibc => Net::Ibc(IbcNet::new(&mut store, config, image, rng)?),
        };
        Ok((store, net))
    }

    /// Fresh parameters drawn from `seed`'s init stream.
    pub fn new(config: PolicyConfig, norm: NormStats, image: Option<usize>, seed: u64) -> Result<Self> {
        norm.validate()?;
        let (params, net) = Self::build(&config, image, &mut stream(seed, Stream::Init))?;
        Ok(Self {
            config,
            norm,
            image,
            params,
            net,
        })
    }

    pub fn algo(&self) -> Algo {
        self.config.algo
    }

    pub fn grid(&self) -> Option<PatchGrid> {
        self.image.map(|size| PatchGrid {
            image: size,
            patch: self.config.patch,
        })
    }

    pub fn draw_noise(&self, n: usize, rng: &mut SimRng) -> LossNoise {
        let w = self.config.window_dim();
        match &self.net {
            Net::Diffusion(d) => {
                LossNoise::Diffusion(DiffusionNoise::draw(n * d.noise_draws, w, d.schedule.steps(), rng))
            }
            Net::LstmGmm(_) => LossNoise::LstmGmm,
            Net::Ibc(i) => LossNoise::Ibc(uniform_box(n * i.n_neg, w, rng)),
        }
    }

    /// Training loss on `batch` and the number of log-stds hitting the floor.
    pub fn loss<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        noise: &LossNoise,
    ) -> Result<(Var, usize)> {
        match (&self.net, noise) {
            (Net::Diffusion(d), LossNoise::Diffusion(z)) => Ok((d.loss(g, pv, batch, z)?, 0)),
            (Net::LstmGmm(l), LossNoise::LstmGmm) => l.loss(g, pv, batch),
            (Net::Ibc(i), LossNoise::Ibc(neg)) => Ok((i.loss(g, pv, batch, neg)?, 0)),
            _ => Err(Error::Contract("loss noise does not match the policy algorithm".into())),
        }
    }

    /// One normalized `T_p × 5` window for a single-item batch.
    pub fn sample_normalized(&self, batch: &Batch, rng: &mut SimRng) -> Result<Vec<f64>> {
        let mut g = Graph::<f32>::new();
        let pv = self.params.bind_constants(&mut g);
        match &self.net {
            Net::Diffusion(d) => d.sample(&mut g, &pv, batch, rng),
            Net::LstmGmm(l) => l.sample(&mut g, &pv, batch, rng),
            Net::Ibc(i) => i.infer(&mut g, &pv, batch, &self.config.ibc, rng),
        }
    }

    /// De-normalized raw actions for the whole predicted horizon.
    pub fn sample_raw(&self, stack: &ObservationStack, rng: &mut SimRng) -> Result<Vec<RawAction>> {
        if stack.depth() != self.config.obs_horizon {
            return Err(Error::Contract(format!(
                "observation stack depth {} but policy expects {}",
                stack.depth(),
                self.config.obs_horizon
            )));
        }
        let frames: Vec<&Observation> = stack.frames().collect();
        let batch = obs_batch(&frames, &self.norm, self.grid())?;
        let window = self.sample_normalized(&batch, rng)?;
        Ok(self.decode_window(&window))
    }

    pub fn decode_window(&self, window: &[f64]) -> Vec<RawAction> {
        window
            .chunks(ACT_DIM)
            .map(|v| {
                let d = self.norm.act.denormalize(v);
                RawAction {
                    pos: [d[0], d[1], d[2]],
                    logits: [v[3], v[4]],
                }
            })
            .collect()
    }

    /// The first `T_a` predicted actions with jaws binarized.
    pub fn predict(&self, stack: &ObservationStack, rng: &mut SimRng) -> Result<Vec<Action>> {
        let raw = self.sample_raw(stack, rng)?;
        raw.iter()
            .take(self.config.action_horizon)
            .map(|r| {
                threshold_jaws(r).map_err(|e| Error::SamplingFailed(format!("policy output rejected: {e}")))
            })
            .collect()
    }
}

impl ActionSource for PolicyModel {
    fn obs_horizon(&self) -> usize {
        self.config.obs_horizon
    }

    fn next_actions(
        &self,
        stack: &ObservationStack,
        _world: &World<'_>,
        rng: &mut SimRng,
    ) -> Result<Vec<Action>> {
        self.predict(stack, rng)
    }
}
