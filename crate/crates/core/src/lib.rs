//! Simulator, datasets, policies and closed-loop runtime for learning a
//! dual-jaw pick-and-rehang task from demonstrations.

pub mod config;
pub mod datasets;
pub mod error;
pub mod policies;
pub mod rng;
pub mod runtime;
pub mod sim;
pub mod types;

pub use config::Config;
pub use error::{Error, Result};
