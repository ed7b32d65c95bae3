//! Library side of the `chicgrasp` command: demo generation, training,
//! evaluation tables, replay plots and the teleop websocket server.

pub mod commands;
pub mod error;
pub mod plot;
pub mod report;
pub mod serve;

pub use error::{CliError, Result};
