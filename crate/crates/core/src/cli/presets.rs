use std::path::Path;

use crate::cli::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../presets/", $name, ".toml")))),*]
    };
}

static PRESETS: &[(&str, &str)] = presets![
    "one_qubit_H_optimal",
    "one_qubit_S_optimal",
    "one_qubit_T_pi8_optimal",
    "h_terminal_time",
    "one_qubit_H_robust",
    "one_qubit_S_robust",
    "one_qubit_T_pi8_robust",
    "s_pulse_count",
    "s_bound",
    "flux_qubit_H_open",
    "flux_qubit_S_open",
    "flux_qubit_T_pi8_open",
    "cnot_optimal",
    "cnot_robust",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: String,
}

pub fn list_presets() -> Vec<PresetInfo> {
    PRESETS
        .iter()
        .map(|(name, _)| PresetInfo {
            name,
            description: preset(name).expect("bundled preset parses").description,
        })
        .collect()
}

/// The TOML source of a bundled preset.
pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::UnknownPreset(name.to_owned()))
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    parse_config(preset_source(name)?, Path::new(&format!("<preset {name}>")))
}
