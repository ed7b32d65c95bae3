//! Imitation policies: conditional diffusion, LSTM-GMM and energy-based
//! IBC behind one interface. Each maps an observation stack to a window of
//! raw actions; [`PolicyModel::predict`] executes the first few with jaws
//! binarized.

mod batch;
mod config;
mod diffusion;
mod encoder;
mod ibc;
mod lstm_gmm;
mod model;
mod model_file;
mod schedule;
mod train;

pub use batch::{obs_batch, window_batch, Batch, PatchGrid};
pub use config::{Algo, DiffusionConfig, IbcConfig, LstmGmmConfig, PolicyConfig, TrainConfig};
pub use diffusion::{DiffusionNet, DiffusionNoise};
pub use encoder::ObsEncoder;
pub use ibc::{derivative_free_minimize, uniform_box, IbcNet};
pub use lstm_gmm::{gmm_nll, gmm_nll_graph, GmmParams, LstmGmmNet, LOG_STD_FLOOR, LOW_NOISE_STD};
pub use model::{LossNoise, Net, PolicyModel};
pub use model_file::{blob_path, Manifest, MODEL_FORMAT_VERSION};
pub use schedule::{make_noise_schedule, q_sample, NoiseSchedule};
pub use train::{cosine_lr, train_policy, EpochStats, Trainer};
