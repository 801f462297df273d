//! Experiment configuration files.
//!
//! Configurations are TOML. Operators are written as sums of Pauli strings
//! (`I X Y Z`, plus `+`/`-` for the raising/lowering operators), with the
//! leftmost symbol acting on qubit 1. Coefficients are numbers or ratios
//! such as `"1/60"`.
//!
//! ```toml
//! name = "one_qubit_H_optimal"
//! target = "H"
//! units = "atomic-units"
//!
//! [time]
//! total = 8.0
//! intervals = 200
//!
//! [system]
//! qubits = 1
//! drift = [{ pauli = "Z", coefficient = 1.0 }]
//!
//! [[system.controls]]
//! name = "omega_x"
//! terms = [{ pauli = "X" }]
//! bounds = [-5.0, 5.0]
//! init = { kind = "sin", amplitude = 1.0 }
//!
//! [optimizer]
//! step_size = 0.5
//! iterations = 200
//! target_infidelity = 1e-14
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::OptimizationConfig;
use crate::linalg::CMatrix;
use crate::lindblad::{OpenNormalization, OpenObjective};
use crate::model::{
    operator_from_string, standard_gate, Bounds, ChannelId, CollapseTerm, ControlTerm, DriftTerm,
    GateName, HamiltonianModel, LindbladModel, TargetGate, TestDistribution, UncertaintyChannel,
    UncertaintyModel, UnitSystem,
};
use crate::pulse::{init_schedule, ControlSchedule, InitialField};
use crate::slc::{Backend, Objective};

/// Converts rates quoted in s⁻¹ to the ns⁻¹ used by the GHz/ns unit system.
const PER_SECOND_TO_PER_NS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub target: GateName,
    #[serde(default)]
    pub units: UnitSystem,
    pub time: TimeBlock,
    pub system: SystemBlock,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dissipation: Vec<CollapseSpec>,
    #[serde(default)]
    pub open: OpenBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyBlock>,
    pub optimizer: OptimizerBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub total: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub qubits: usize,
    #[serde(default)]
    pub drift: Vec<DriftSpec>,
    pub controls: Vec<ControlSpec>,
}

/// A number, or a ratio written as a string (`"1/30"`, `"-3/2"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Text(String),
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Number(1.0)
    }
}

impl Coefficient {
    pub fn value(&self) -> std::result::Result<f64, String> {
        let v = match self {
            Coefficient::Number(x) => *x,
            Coefficient::Text(s) => {
                parse_ratio(s).ok_or_else(|| format!("cannot read coefficient `{s}`"))?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("coefficient {v} is not finite"))
        }
    }
}

fn parse_ratio(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((num, den)) => {
            let den: f64 = den.trim().parse().ok()?;
            (den != 0.0).then_some(num.trim().parse::<f64>().ok()? / den)
        }
        None => s.trim().parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub pauli: String,
    #[serde(default)]
    pub coefficient: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub pauli: String,
    #[serde(default)]
    pub coefficient: Coefficient,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub name: String,
    pub terms: Vec<PauliTerm>,
    pub bounds: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    pub init: InitialField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateUnits {
    /// Already in inverse model time units.
    #[default]
    PerModelTime,
    /// s⁻¹; only meaningful with `units = "ghz-ns"`.
    PerSecond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSpec {
    pub pauli: String,
    pub rate: f64,
    #[serde(default)]
    pub rate_units: RateUnits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenBlock {
    #[serde(default)]
    pub normalization: OpenNormalization,
    #[serde(default)]
    pub objective: OpenObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyBlock {
    #[serde(default)]
    pub objective: Objective,
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
    pub channels: Vec<ChannelSpec>,
}

fn default_test_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    pub bound: f64,
    pub grid: usize,
    #[serde(default)]
    pub distribution: DistributionSpec,
}

/// Test-time distribution. A gaussian without `sigma` uses half the bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    #[default]
    Uniform,
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    pub step_size: f64,
    pub iterations: usize,
    #[serde(default)]
    pub target_infidelity: f64,
    /// Seeds the Monte-Carlo test draw.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Number of piecewise-constant intervals `N`.
    PulseCount,
    /// Fluctuation bound `E`, applied to every uncertainty channel.
    Bound,
    /// Terminal time `T`.
    TerminalTime,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::PulseCount => "pulse-count",
            SweepParam::Bound => "bound",
            SweepParam::TerminalTime => "terminal-time",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Everything needed to run one optimisation, resolved from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub backend: Backend,
    pub target: TargetGate,
    pub initial: ControlSchedule,
    pub optimizer: OptimizationConfig,
    pub uncertainty: Option<UncertaintyModel>,
    pub objective: Objective,
    pub test_samples: usize,
}

impl Experiment {
    pub fn is_open(&self) -> bool {
        matches!(self.backend, Backend::Open { .. })
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}

/// Parses and validates; `origin` is only used in error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn is_open(&self) -> bool {
        !self.dissipation.is_empty()
    }

    /// Reports every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let channels: Vec<&str> = self
            .uncertainty
            .iter()
            .flat_map(|u| u.channels.iter().map(|c| c.name.as_str()))
            .collect();

        let target_qubits = match standard_gate(self.target) {
            Ok(gate) => Some(gate.qubits),
            Err(_) => {
                problems.push(format!("target `{}` is not a standard gate", self.target));
                None
            }
        };
        if let Some(q) = target_qubits {
            if q != self.system.qubits {
                problems.push(format!(
                    "target `{}` acts on {q} qubit(s) but system.qubits = {}",
                    self.target, self.system.qubits
                ));
            }
        }

        if !(self.time.total > 0.0 && self.time.total.is_finite()) {
            problems.push(format!("time.total = {} must be positive", self.time.total));
        }
        if self.time.intervals == 0 {
            problems.push("time.intervals must be at least 1".into());
        }

        let qubits = self.system.qubits;
        let check_channel = |owner: &str, channel: &Option<String>, problems: &mut Vec<String>| {
            if let Some(name) = channel {
                if !channels.contains(&name.as_str()) {
                    problems.push(format!(
                        "{owner} refers to undefined uncertainty channel `{name}`"
                    ));
                }
            }
        };
        for (k, d) in self.system.drift.iter().enumerate() {
            let owner = format!("system.drift[{k}]");
            check_pauli(&owner, &d.pauli, qubits, &mut problems);
            if let Err(e) = d.coefficient.value() {
                problems.push(format!("{owner}: {e}"));
            }
            check_channel(&owner, &d.channel, &mut problems);
        }
        if self.system.controls.is_empty() {
            problems.push("system.controls must define at least one control".into());
        }
        let mut names = HashSet::new();
        for c in &self.system.controls {
            let owner = format!("control `{}`", c.name);
            if !names.insert(c.name.as_str()) {
                problems.push(format!("{owner} is defined twice"));
            }
            if c.terms.is_empty() {
                problems.push(format!("{owner} has no operator terms"));
            }
            for t in &c.terms {
                check_pauli(&owner, &t.pauli, qubits, &mut problems);
                if let Err(e) = t.coefficient.value() {
                    problems.push(format!("{owner}: {e}"));
                }
            }
            let [lo, hi] = c.bounds;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                problems.push(format!("{owner} bounds [{lo}, {hi}] must satisfy lo < hi"));
            }
            check_channel(&owner, &c.channel, &mut problems);
        }

        for (k, d) in self.dissipation.iter().enumerate() {
            let owner = format!("dissipation[{k}]");
            check_pauli(&owner, &d.pauli, qubits, &mut problems);
            if !(d.rate >= 0.0) || !d.rate.is_finite() {
                problems.push(format!("{owner} rate {} must be >= 0", d.rate));
            }
            if d.rate_units == RateUnits::PerSecond && self.units != UnitSystem::GhzNs {
                problems.push(format!(
                    "{owner} gives a rate per second, which needs units = \"ghz-ns\""
                ));
            }
            check_channel(&owner, &d.channel, &mut problems);
        }

        if let Some(u) = &self.uncertainty {
            let mut seen = HashSet::new();
            for c in &u.channels {
                if !seen.insert(c.name.as_str()) {
                    problems.push(format!("uncertainty channel `{}` is defined twice", c.name));
                }
                if !(0.0..1.0).contains(&c.bound) {
                    problems.push(format!(
                        "uncertainty channel `{}` bound {} must lie in [0, 1)",
                        c.name, c.bound
                    ));
                }
                if c.grid == 0 {
                    problems.push(format!("uncertainty channel `{}` needs grid >= 1", c.name));
                }
                if let DistributionSpec::Gaussian { sigma: Some(s) } = c.distribution {
                    if !(s > 0.0) {
                        problems.push(format!(
                            "uncertainty channel `{}` sigma {s} must be > 0",
                            c.name
                        ));
                    }
                }
            }
            if u.test_samples == 0 {
                problems.push("uncertainty.test_samples must be at least 1".into());
            }
        }

        let o = &self.optimizer;
        if !(o.step_size > 0.0) || !o.step_size.is_finite() {
            problems.push(format!("optimizer.step_size = {} must be > 0", o.step_size));
        }
        if !(o.target_infidelity >= 0.0) {
            problems.push(format!(
                "optimizer.target_infidelity = {} must be >= 0",
                o.target_infidelity
            ));
        }

        if let Some(s) = &self.sweep {
            validate_sweep(self, s.param, &s.values, &mut problems);
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Resolves operators, channels and the starting schedule.
    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let units = self.units;
        let uncertainty = self
            .uncertainty
            .as_ref()
            .map(uncertainty_model)
            .transpose()?;
        let channel_id = |name: &Option<String>| -> Option<ChannelId> {
            let (u, name) = (uncertainty.as_ref()?, name.as_ref()?);
            u.find(name)
        };

        let drift = self
            .system
            .drift
            .iter()
            .map(|d| {
                Ok(DriftTerm {
                    operator: operator_from_string(&d.pauli)?,
                    coefficient: d.coefficient.value().map_err(Error::Model)?,
                    channel: channel_id(&d.channel),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let controls = self
            .system
            .controls
            .iter()
            .map(|c| {
                Ok(ControlTerm {
                    name: c.name.clone(),
                    operator: pauli_sum(&c.terms)?,
                    channel: channel_id(&c.channel),
                    bounds: Bounds::new(c.bounds[0], c.bounds[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hamiltonian = HamiltonianModel::new(drift, controls, units)?;

        let backend = if self.is_open() {
            let collapse = self
                .dissipation
                .iter()
                .map(|d| {
                    let scale = match d.rate_units {
                        RateUnits::PerModelTime => 1.0,
                        RateUnits::PerSecond => PER_SECOND_TO_PER_NS,
                    };
                    Ok(CollapseTerm {
                        operator: operator_from_string(&d.pauli)?,
                        rate: d.rate * scale,
                        channel: channel_id(&d.channel),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Backend::Open {
                model: LindbladModel::new(hamiltonian.clone(), collapse)?,
                normalization: self.open.normalization,
                objective: self.open.objective,
            }
        } else {
            Backend::Unitary(hamiltonian.clone())
        };

        let fields: Vec<InitialField> = self.system.controls.iter().map(|c| c.init).collect();
        let initial = init_schedule(&fields, &hamiltonian, self.time.total, self.time.intervals)?;
        let mut optimizer = OptimizationConfig::new(
            self.optimizer.step_size,
            self.optimizer.iterations,
            self.optimizer.target_infidelity,
        );
        optimizer.seed = self.optimizer.seed;

        Ok(Experiment {
            backend,
            target: standard_gate(self.target)?,
            initial,
            optimizer,
            uncertainty,
            objective: self
                .uncertainty
                .as_ref()
                .map(|u| u.objective)
                .unwrap_or_default(),
            test_samples: self.uncertainty.as_ref().map_or(0, |u| u.test_samples),
        })
    }

    /// A copy with one sweep parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut problems = Vec::new();
        validate_sweep(self, param, &[value], &mut problems);
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let mut out = self.clone();
        match param {
            SweepParam::PulseCount => out.time.intervals = value as usize,
            SweepParam::TerminalTime => out.time.total = value,
            SweepParam::Bound => {
                for c in &mut out.uncertainty.as_mut().unwrap().channels {
                    c.bound = value;
                }
            }
        }
        Ok(out)
    }
}

fn validate_sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    problems: &mut Vec<String>,
) {
    if values.is_empty() {
        problems.push("sweep needs at least one value".into());
    }
    for &v in values {
        let ok = match param {
            SweepParam::PulseCount => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
            SweepParam::TerminalTime => v > 0.0 && v.is_finite(),
            SweepParam::Bound => (0.0..1.0).contains(&v),
        };
        if !ok {
            problems.push(format!("sweep value {v} is not a valid {param}"));
        }
    }
    if param == SweepParam::Bound
        && config
            .uncertainty
            .as_ref()
            .is_none_or(|u| u.channels.is_empty())
    {
        problems.push("a bound sweep needs uncertainty channels".into());
    }
}

fn check_pauli(owner: &str, pauli: &str, qubits: usize, problems: &mut Vec<String>) {
    let len = pauli.trim().chars().count();
    if len != qubits {
        problems.push(format!(
            "{owner}: operator `{pauli}` has {len} factor(s), expected {qubits}"
        ));
    } else if let Err(e) = operator_from_string(pauli) {
        problems.push(format!("{owner}: {e}"));
    }
}

fn pauli_sum(terms: &[PauliTerm]) -> Result<CMatrix> {
    let mut acc: Option<CMatrix> = None;
    for t in terms {
        let op = operator_from_string(&t.pauli)?
            .scale_real(t.coefficient.value().map_err(Error::Model)?);
        acc = Some(match acc {
            None => op,
            Some(prev) => &prev + &op,
        });
    }
    acc.ok_or_else(|| Error::Model("empty operator sum".into()))
}

fn uncertainty_model(block: &UncertaintyBlock) -> Result<UncertaintyModel> {
    let channels = block
        .channels
        .iter()
        .map(|c| UncertaintyChannel {
            name: c.name.clone(),
            bound: c.bound,
            grid_count: c.grid,
            distribution: match c.distribution {
                DistributionSpec::Uniform => TestDistribution::Uniform,
                DistributionSpec::Gaussian { sigma } => TestDistribution::Gaussian {
                    sigma: sigma.unwrap_or(c.bound / 2.0),
                },
            },
        })
        .collect();
    UncertaintyModel::new(channels)
}
