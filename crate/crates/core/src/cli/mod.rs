//! Configuration, bundled presets and artifact output for the binary.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_config, Experiment, ExperimentConfig, SweepParam};
pub use presets::{list_presets, preset, preset_source, PresetInfo};
pub use run::{execute, run, sweep, write_artifacts, RunOutcome, RunSummary, SweepPoint};
