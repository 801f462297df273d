//! Target gates, Pauli operators, control Hamiltonians with multiplicative
//! uncertainty channels, and Lindblad generators.
//!
//! Conventions used throughout the crate:
//!
//! * basis ordering `|0⟩ = (1, 0)ᵀ`, `|1⟩ = (0, 1)ᵀ`; `σ₋ = |0⟩⟨1|`;
//! * in multi-qubit operator strings the leftmost character acts on qubit 1
//!   and is the leftmost Kronecker factor;
//! * `ħ = 1`; a drift `ω₀σ_z` carries no implicit factor ½;
//! * density matrices are vectorised by stacking columns, so
//!   `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, C64, I, ONE, ZERO};

const HERMITIAN_TOL: f64 = 1e-12;

pub fn identity2() -> CMatrix {
    CMatrix::identity(2)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_real_rows([[0.0, 1.0], [1.0, 0.0]])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_rows([[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_real_rows([[1.0, 0.0], [0.0, -1.0]])
}

/// `|0⟩⟨1|`: lowers `|1⟩` to `|0⟩`.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_real_rows([[0.0, 1.0], [0.0, 0.0]])
}

pub fn sigma_plus() -> CMatrix {
    CMatrix::from_real_rows([[0.0, 0.0], [1.0, 0.0]])
}

/// Builds a tensor product of single-qubit operators from a string such as
/// `"XZ"`. Accepted symbols: `I X Y Z` and `+`/`-` for `σ₊`/`σ₋`.
pub fn operator_from_string(s: &str) -> Result<CMatrix> {
    let mut acc: Option<CMatrix> = None;
    for ch in s.trim().chars() {
        let factor = match ch.to_ascii_uppercase() {
            'I' => identity2(),
            'X' => sigma_x(),
            'Y' => sigma_y(),
            'Z' => sigma_z(),
            '+' => sigma_plus(),
            '-' => sigma_minus(),
            other => {
                return Err(Error::Model(format!(
                    "unknown operator symbol `{other}` in `{s}`"
                )))
            }
        };
        acc = Some(match acc {
            None => factor,
            Some(prev) => kron(&prev, &factor),
        });
    }
    acc.ok_or_else(|| Error::Model("empty operator string".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateName {
    H,
    S,
    #[serde(rename = "T_pi8")]
    TPi8,
    #[serde(rename = "CNOT")]
    Cnot,
    Custom,
}

impl fmt::Display for GateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateName::H => "H",
            GateName::S => "S",
            GateName::TPi8 => "T_pi8",
            GateName::Cnot => "CNOT",
            GateName::Custom => "custom",
        })
    }
}

impl FromStr for GateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" | "hadamard" => Ok(GateName::H),
            "S" | "s" => Ok(GateName::S),
            "T" | "T_pi8" | "t_pi8" | "T_pi/8" => Ok(GateName::TPi8),
            "CNOT" | "cnot" | "CX" => Ok(GateName::Cnot),
            other => Err(Error::UnknownGate(other.to_string())),
        }
    }
}

/// Desired gate `U_F`.
#[derive(Debug, Clone)]
pub struct TargetGate {
    pub name: GateName,
    pub matrix: CMatrix,
    pub qubits: usize,
}

impl TargetGate {
    /// Wraps an arbitrary unitary on one or two qubits.
    pub fn custom(matrix: CMatrix) -> Result<Self> {
        let qubits = match matrix.dim() {
            2 => 1,
            4 => 2,
            d => {
                return Err(Error::Model(format!(
                    "custom target must be 2x2 or 4x4, got {d}x{d}"
                )))
            }
        };
        if !matrix.is_unitary(HERMITIAN_TOL) {
            return Err(Error::Model("custom target is not unitary".into()));
        }
        Ok(Self {
            name: GateName::Custom,
            matrix,
            qubits,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `2^q`, the fidelity normalisation.
    pub fn norm(&self) -> f64 {
        (1usize << self.qubits) as f64
    }
}

pub fn standard_gate(name: GateName) -> Result<TargetGate> {
    let (matrix, qubits) = match name {
        GateName::H => (
            CMatrix::from_real_rows([[1.0, 1.0], [1.0, -1.0]]).scale_real(FRAC_1_SQRT_2),
            1,
        ),
        GateName::S => (CMatrix::diagonal(&[ONE, I]), 1),
        GateName::TPi8 => (
            CMatrix::diagonal(&[ONE, C64::from_polar(1.0, FRAC_PI_4)]),
            1,
        ),
        GateName::Cnot => (
            CMatrix::from_real_rows([
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, 1.0, 0.0],
            ]),
            2,
        ),
        GateName::Custom => {
            return Err(Error::UnknownGate(
                "custom gates need an explicit matrix".into(),
            ))
        }
    };
    Ok(TargetGate {
        name,
        matrix,
        qubits,
    })
}

/// Index of an uncertainty channel within an [`UncertaintyModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelId(pub usize);

/// One concrete draw of the multiplicative parameters `ε`, indexed by
/// [`ChannelId`]. Channels beyond the stored length read as `ε = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintySample {
    pub eps: Vec<f64>,
}

impl UncertaintySample {
    pub fn nominal() -> Self {
        Self::default()
    }

    pub fn new(eps: Vec<f64>) -> Self {
        Self { eps }
    }

    pub fn epsilon(&self, channel: Option<ChannelId>) -> f64 {
        match channel {
            Some(ChannelId(k)) => self.eps.get(k).copied().unwrap_or(1.0),
            None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestDistribution {
    Uniform,
    /// Normal around 1 with the given standard deviation, truncated to
    /// `[1 - E, 1 + E]`.
    Gaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyChannel {
    pub name: String,
    /// Fluctuation bound `E`; `ε ∈ [1 - E, 1 + E]`.
    pub bound: f64,
    /// Training grid points along this channel.
    pub grid_count: usize,
    pub distribution: TestDistribution,
}

impl UncertaintyChannel {
    pub fn uniform(name: impl Into<String>, bound: f64, grid_count: usize) -> Self {
        Self {
            name: name.into(),
            bound,
            grid_count,
            distribution: TestDistribution::Uniform,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (1.0 - self.bound, 1.0 + self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyModel {
    pub channels: Vec<UncertaintyChannel>,
}

impl UncertaintyModel {
    pub fn new(channels: Vec<UncertaintyChannel>) -> Result<Self> {
        let model = Self { channels };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (k, ch) in self.channels.iter().enumerate() {
            if !(0.0..1.0).contains(&ch.bound) {
                problems.push(format!(
                    "channel `{}` bound {} outside [0, 1)",
                    ch.name, ch.bound
                ));
            }
            if ch.grid_count == 0 {
                problems.push(format!("channel `{}` needs a grid count >= 1", ch.name));
            }
            if let TestDistribution::Gaussian { sigma } = ch.distribution {
                if !(sigma > 0.0) {
                    problems.push(format!("channel `{}` gaussian sigma must be > 0", ch.name));
                }
            }
            if self.channels[..k].iter().any(|c| c.name == ch.name) {
                problems.push(format!("duplicate channel `{}`", ch.name));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn find(&self, name: &str) -> Option<ChannelId> {
        self.channels
            .iter()
            .position(|c| c.name == name)
            .map(ChannelId)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Copy with every channel bound replaced by `bound`.
    pub fn with_bound(&self, bound: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.bound = bound;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    #[default]
    AtomicUnits,
    /// Frequencies in rad/ns, times in ns.
    GhzNs,
}

#[derive(Debug, Clone)]
pub struct DriftTerm {
    pub operator: CMatrix,
    pub coefficient: f64,
    pub channel: Option<ChannelId>,
}

#[derive(Debug, Clone)]
pub struct ControlTerm {
    pub name: String,
    pub operator: CMatrix,
    pub channel: Option<ChannelId>,
    pub bounds: Bounds,
}

/// `H = Σ ε_d c_d H_d + Σ_m ε_m u_m H_m`.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    dim: usize,
    pub drift: Vec<DriftTerm>,
    pub controls: Vec<ControlTerm>,
    pub units: UnitSystem,
}

impl HamiltonianModel {
    pub fn new(
        drift: Vec<DriftTerm>,
        controls: Vec<ControlTerm>,
        units: UnitSystem,
    ) -> Result<Self> {
        let dim = drift
            .first()
            .map(|d| d.operator.dim())
            .or_else(|| controls.first().map(|c| c.operator.dim()))
            .ok_or_else(|| Error::Model("Hamiltonian has no terms".into()))?;
        let mut problems = Vec::new();
        for (k, d) in drift.iter().enumerate() {
            if d.operator.dim() != dim {
                problems.push(format!(
                    "drift term {k} has dim {}, expected {dim}",
                    d.operator.dim()
                ));
            } else if !d.operator.is_hermitian(HERMITIAN_TOL) {
                problems.push(format!("drift term {k} is not Hermitian"));
            }
        }
        for c in &controls {
            if c.operator.dim() != dim {
                problems.push(format!(
                    "control `{}` has dim {}, expected {dim}",
                    c.name,
                    c.operator.dim()
                ));
            } else if !c.operator.is_hermitian(HERMITIAN_TOL) {
                problems.push(format!("control `{}` is not Hermitian", c.name));
            }
            if !(c.bounds.lo < c.bounds.hi) {
                problems.push(format!(
                    "control `{}` bounds [{}, {}] need lo < hi",
                    c.name, c.bounds.lo, c.bounds.hi
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            dim,
            drift,
            controls,
            units,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    pub fn bounds(&self) -> Vec<Bounds> {
        self.controls.iter().map(|c| c.bounds).collect()
    }

    /// Folds the sample's `ε` values into the operators.
    pub fn resolve(&self, sample: &UncertaintySample) -> ResolvedHamiltonian {
        let mut drift = CMatrix::zeros(self.dim);
        for d in &self.drift {
            drift.add_scaled_real(sample.epsilon(d.channel) * d.coefficient, &d.operator);
        }
        let controls = self
            .controls
            .iter()
            .map(|c| c.operator.scale_real(sample.epsilon(c.channel)))
            .collect();
        ResolvedHamiltonian { drift, controls }
    }
}

/// A Hamiltonian with one uncertainty sample applied: `H(u) = drift + Σ u_m controls[m]`.
#[derive(Debug, Clone)]
pub struct ResolvedHamiltonian {
    pub drift: CMatrix,
    pub controls: Vec<CMatrix>,
}

impl ResolvedHamiltonian {
    pub fn at(&self, amplitudes: &[f64]) -> CMatrix {
        debug_assert_eq!(amplitudes.len(), self.controls.len());
        let mut h = self.drift.clone();
        for (u, hm) in amplitudes.iter().zip(&self.controls) {
            h.add_scaled_real(*u, hm);
        }
        h
    }
}

/// `ε₀·c·H₀ + Σ_m ε_m·u_m·H_m` for the given sample and amplitudes.
pub fn hamiltonian_at(
    model: &HamiltonianModel,
    sample: &UncertaintySample,
    amplitudes: &[f64],
) -> Result<CMatrix> {
    if amplitudes.len() != model.control_count() {
        return Err(Error::DimensionMismatch {
            expected: model.control_count(),
            found: amplitudes.len(),
        });
    }
    if amplitudes.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(model.resolve(sample).at(amplitudes))
}

#[derive(Debug, Clone)]
pub struct CollapseTerm {
    pub operator: CMatrix,
    /// Rate `Γ` in inverse model time units.
    pub rate: f64,
    pub channel: Option<ChannelId>,
}

#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: HamiltonianModel,
    pub collapse: Vec<CollapseTerm>,
}

impl LindbladModel {
    pub fn new(hamiltonian: HamiltonianModel, collapse: Vec<CollapseTerm>) -> Result<Self> {
        let mut problems = Vec::new();
        for (k, c) in collapse.iter().enumerate() {
            if c.operator.dim() != hamiltonian.dim() {
                problems.push(format!("collapse term {k} has wrong dimension"));
            }
            if !(c.rate >= 0.0) || !c.rate.is_finite() {
                problems.push(format!(
                    "collapse term {k} rate {} must be finite and >= 0",
                    c.rate
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            hamiltonian,
            collapse,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn resolve(&self, sample: &UncertaintySample) -> Result<ResolvedLindblad> {
        let d = self.dim();
        let mut dissipator = CMatrix::zeros(d * d);
        for (k, c) in self.collapse.iter().enumerate() {
            let rate = sample.epsilon(c.channel) * c.rate;
            if rate < 0.0 {
                return Err(Error::Model(format!(
                    "collapse term {k} has negative effective rate {rate}"
                )));
            }
            if rate != 0.0 {
                dissipator.add_scaled_real(rate, &dissipator_superop(&c.operator));
            }
        }
        let ham = self.hamiltonian.resolve(sample);
        let drift = &commutator_superop(&ham.drift) + &dissipator;
        let controls = ham.controls.iter().map(commutator_superop).collect();
        Ok(ResolvedLindblad { drift, controls })
    }
}

/// Liouvillian with one sample applied: `L(u) = drift + Σ u_m controls[m]`,
/// where `controls[m] = -i(I⊗H_m - H_mᵀ⊗I)` is also `∂L/∂u_m`.
#[derive(Debug, Clone)]
pub struct ResolvedLindblad {
    pub drift: CMatrix,
    pub controls: Vec<CMatrix>,
}

impl ResolvedLindblad {
    pub fn at(&self, amplitudes: &[f64]) -> CMatrix {
        let mut l = self.drift.clone();
        for (u, k) in amplitudes.iter().zip(&self.controls) {
            l.add_scaled_real(*u, k);
        }
        l
    }
}

/// Superoperator of `ρ ↦ -i[H, ρ]`.
pub fn commutator_superop(h: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(h.dim());
    let mut out = kron(&id, h);
    out.add_scaled_real(-1.0, &kron(&h.transpose(), &id));
    out.scale(-I)
}

/// Superoperator of `D[c]ρ = cρc† - ½c†cρ - ½ρc†c`.
pub fn dissipator_superop(c: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(c.dim());
    let cdc = c.adjoint_mul(c);
    let mut out = kron(&c.conj(), c);
    out.add_scaled_real(-0.5, &kron(&id, &cdc));
    out.add_scaled_real(-0.5, &kron(&cdc.transpose(), &id));
    out
}

/// `L` with `vec(ρ̇) = L vec(ρ)` under column stacking.
pub fn liouvillian(
    model: &LindbladModel,
    sample: &UncertaintySample,
    amplitudes: &[f64],
) -> Result<CMatrix> {
    if amplitudes.len() != model.hamiltonian.control_count() {
        return Err(Error::DimensionMismatch {
            expected: model.hamiltonian.control_count(),
            found: amplitudes.len(),
        });
    }
    Ok(model.resolve(sample)?.at(amplitudes))
}
