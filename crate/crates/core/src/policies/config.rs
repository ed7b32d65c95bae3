use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ACT_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algo {
    Diffusion,
    LstmGmm,
    Ibc,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Diffusion, Algo::LstmGmm, Algo::Ibc];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Diffusion => "DIFFUSION",
            Algo::LstmGmm => "LSTM_GMM",
            Algo::Ibc => "IBC",
        }
    }

    /// Batch size used when training does not override it.
    pub fn default_batch(self) -> usize {
        match self {
            Algo::Diffusion => 32,
            Algo::LstmGmm => 64,
            Algo::Ibc => 128,
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "diffusion" => Ok(Algo::Diffusion),
            "lstm_gmm" | "lstmgmm" => Ok(Algo::LstmGmm),
            "ibc" => Ok(Algo::Ibc),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub n_diff: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub hidden: usize,
    pub blocks: usize,
    pub t_embed: usize,
    /// Independent `(t, ε)` draws per window in each loss evaluation.
    pub noise_draws: usize,
    /// Clip the predicted clean window to `[-1, 1]` at every reverse step.
    pub clip_sample: bool,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            n_diff: 50,
            beta_min: 1e-4,
            beta_max: 0.02,
            hidden: 256,
            blocks: 3,
            t_embed: 32,
            noise_draws: 8,
            clip_sample: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmGmmConfig {
    pub hidden: usize,
    pub modes: usize,
    /// At inference, pick a mixture component as usual but replace its std
    /// with [`LOW_NOISE_STD`](super::LOW_NOISE_STD).
    pub low_noise_eval: bool,
}

impl Default for LstmGmmConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            modes: 5,
            low_noise_eval: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbcConfig {
    pub n_neg: usize,
    pub n_samples: usize,
    pub m_iters: usize,
    pub temperature: f64,
    /// Initial jitter std (normalized units), halved each iteration.
    pub jitter: f64,
    pub hidden: Vec<usize>,
}

impl Default for IbcConfig {
    fn default() -> Self {
        Self {
            n_neg: 64,
            n_samples: 256,
            m_iters: 3,
            temperature: 0.1,
            jitter: 0.1,
            hidden: vec![128, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub algo: Algo,
    /// Observation stack depth T_o.
    pub obs_horizon: usize,
    /// Predicted action horizon T_p.
    pub pred_horizon: usize,
    /// Executed action horizon T_a.
    pub action_horizon: usize,
    pub act_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub obs_embed: usize,
    /// Patch side length for the image encoder.
    pub patch: usize,
    /// Spatial-softmax keypoint channels for the image encoder.
    pub keypoints: usize,
    pub diffusion: DiffusionConfig,
    pub lstm_gmm: LstmGmmConfig,
    pub ibc: IbcConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Diffusion,
            obs_horizon: 2,
            pred_horizon: 8,
            action_horizon: 4,
            act_dim: ACT_DIM,
            encoder_hidden: vec![128],
            obs_embed: 64,
            patch: 4,
            keypoints: 8,
            diffusion: DiffusionConfig::default(),
            lstm_gmm: LstmGmmConfig::default(),
            ibc: IbcConfig::default(),
        }
    }
}

impl PolicyConfig {
    pub fn with_algo(algo: Algo) -> Self {
        Self {
            algo,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.act_dim != ACT_DIM {
            return bad(format!("act_dim must be {ACT_DIM}, got {}", self.act_dim));
        }
        if self.obs_horizon == 0 {
            return bad("obs_horizon must be ≥ 1".into());
        }
        if !(1 <= self.action_horizon && self.action_horizon <= self.pred_horizon) {
            return bad(format!(
                "need 1 ≤ action_horizon ({}) ≤ pred_horizon ({})",
                self.action_horizon, self.pred_horizon
            ));
        }
        if self.obs_embed == 0 || self.encoder_hidden.contains(&0) || self.patch == 0 || self.keypoints == 0 {
            return bad("encoder sizes must be positive".into());
        }
        let d = &self.diffusion;
        if d.n_diff == 0 || !(0.0 < d.beta_min && d.beta_min <= d.beta_max && d.beta_max < 1.0) {
            return bad(format!(
                "diffusion schedule needs n_diff ≥ 1 and 0 < beta_min ≤ beta_max < 1, got {} [{}, {}]",
                d.n_diff, d.beta_min, d.beta_max
            ));
        }
        if d.hidden == 0 || d.noise_draws == 0 || d.t_embed == 0 || d.t_embed % 2 != 0 {
            return bad("diffusion hidden and noise_draws must be positive and t_embed even".into());
        }
        if self.lstm_gmm.hidden == 0 || self.lstm_gmm.modes == 0 {
            return bad("lstm_gmm hidden and modes must be ≥ 1".into());
        }
        let i = &self.ibc;
        if i.n_neg == 0 || i.n_samples == 0 || i.m_iters == 0 || i.hidden.contains(&0) {
            return bad("ibc n_neg, n_samples, m_iters and hidden sizes must be ≥ 1".into());
        }
        if !(i.temperature > 0.0) || !(i.jitter >= 0.0) {
            return bad("ibc temperature must be positive and jitter non-negative".into());
        }
        Ok(())
    }

    /// Length of the flattened action window.
    pub fn window_dim(&self) -> usize {
        self.pred_horizon * self.act_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Falls back to the per-algorithm default when absent.
    pub batch: Option<usize>,
    pub lr: f64,
    /// Cosine-decay the learning rate to zero over training.
    pub cosine_decay: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            batch: None,
            lr: 3e-3,
            cosine_decay: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Reduced schedule for quick runs and CI.
    pub fn fast() -> Self {
        Self {
            epochs: 30,
            ..Self::default()
        }
    }

    pub fn batch_for(&self, algo: Algo) -> usize {
        self.batch.unwrap_or_else(|| algo.default_batch())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == Some(0) || !(self.lr > 0.0) {
            return Err(Error::Config("epochs, batch and lr must be positive".into()));
        }
        Ok(())
    }
}
