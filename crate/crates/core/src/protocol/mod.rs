//! Experiment configuration, run manifests and the protocol commands that
//! turn a configuration into data files.

pub mod angle;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod state;

pub use angle::Angle;
pub use commands::{
    calibrate, first_click, oracle_check, rerun, run_command, sweep, tomogram, trajectories, RerunReport,
};
pub use config::ExperimentConfig;
pub use manifest::{CalibrationSource, CommandKind, RunManifest};
pub use state::StateSpec;
