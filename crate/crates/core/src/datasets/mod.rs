//! Demonstrations: the scripted expert, recording, JSONL storage,
//! normalization statistics and training windows.

mod demo;
mod expert;
mod norm;
mod record;
mod windows;

pub use demo::{DemoMeta, DemoSet, Demonstration, Frame, Mode, Source, DEMO_FORMAT_VERSION};
pub use expert::{scripted_expert, ExpertConfig};
pub use norm::{compute_norm_stats, DimStats, NormStats, MIN_SPAN};
pub use record::{demo_from_episode, generate_demos, record_episode, replay_demo, GenSummary};
pub use windows::{sample_windows, TrainingWindow, WindowIndex};
