//! Experiment harness for the deformable matched-filter CAP modem:
//! configuration, reproducible training loops, cutoff/power sweeps and CSV
//! artifact export.

pub mod checkpoint;
pub mod config;
pub mod export;
pub mod harness;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, Mode, PowerAxis, Profile};
