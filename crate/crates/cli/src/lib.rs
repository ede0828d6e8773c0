//! Deterministic experiment runner on top of `slocc-core`: each
//! subcommand regenerates one dataset (entanglement and CHSH sweeps,
//! Bell-state reconstructions, occupancy and distinguishability checks,
//! interference scans, teleportation tables, process matrices) as CSV
//! and JSON files stamped with a hash of the resolved configuration.

pub mod config;
pub mod experiments;

pub use config::{Experiment, ExperimentConfig, HomConfig};
pub use experiments::run;
