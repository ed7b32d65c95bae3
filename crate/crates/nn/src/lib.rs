//! Minimal reverse-mode automatic differentiation with just enough neural
//! network machinery to train small policies on a CPU.

pub mod embed;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use embed::sinusoidal_embedding;
pub use error::{NnError, Result};
pub use gradcheck::gradcheck;
pub use graph::{log_sum_exp, sigmoid, Gradients, Graph, Var};
pub use layers::{spatial_softmax, LayerNorm, Linear, LstmCell, Mlp};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{Param, ParamId, ParamStore, TensorRecord};
pub use tensor::{Scalar, Tensor};
