use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in `{op}`: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged: non-finite gradient for parameter `{param}`")]
    TrainingDiverged { param: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
