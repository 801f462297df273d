//! Open-system GRAPE on the channel superoperator `𝒢(t)`.
//!
//! Each interval contributes `G_j = exp(L_j Δt)` and `𝒢(T) = G_N ⋯ G_1`.
//! The target unitary is lifted to `S_F = conj(U_F) ⊗ U_F`, which maps
//! `vec(ρ)` to `vec(U_F ρ U_F†)`, and the fidelity is
//! `|tr(S_F† 𝒢(T))| / 4^q` so that a perfectly realised gate scores 1.
//!
//! The gradient mirrors the closed-system one in superoperator space, with
//! `∂L_j/∂u_m = -i(I ⊗ ε_m H_m - ε_m H_mᵀ ⊗ I)` and the adjoint chain
//! `ℬ_j = (G_N ⋯ G_{j+1})† S_F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{ascend, OptimizationConfig, OptimizationReport};
use crate::linalg::{expm, hs_inner, kron, CMatrix, C64};
use crate::model::{LindbladModel, ResolvedLindblad, TargetGate, UncertaintySample};
use crate::parallel::Execution;
use crate::pulse::ControlSchedule;
use crate::slc::{AugmentedProblem, Backend, Objective};

/// Interval channels `G_j` and forward products `𝒜_j = G_j ⋯ G_1`.
#[derive(Debug, Clone)]
pub struct ChannelChain {
    pub steps: Vec<CMatrix>,
    pub forward: Vec<CMatrix>,
    pub dt: f64,
}

impl ChannelChain {
    pub fn terminal(&self) -> &CMatrix {
        self.forward
            .last()
            .expect("chain has at least one interval")
    }
}

/// Divisor applied to `|tr(S_F† 𝒢)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenNormalization {
    /// `4^q`, the superoperator dimension: perfect gate scores 1.
    #[default]
    Superoperator,
    /// `2^q`, kept for comparison; values can exceed 1.
    Literal,
}

/// Which function of `w = tr(S_F† 𝒢(T))` the open optimiser ascends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenObjective {
    /// `|w|²`.
    #[default]
    SquaredOverlap,
    /// `|w|`; coincides with the closed-system `Φ` when there is no
    /// dissipation, since `w = |tr(U_F† U)|²` there.
    Overlap,
}

#[derive(Debug, Clone)]
pub struct OpenTarget {
    pub gate: TargetGate,
    pub lifted: CMatrix,
    pub normalization: OpenNormalization,
}

impl OpenTarget {
    pub fn new(gate: TargetGate) -> Self {
        Self::with_normalization(gate, OpenNormalization::Superoperator)
    }

    pub fn with_normalization(gate: TargetGate, normalization: OpenNormalization) -> Self {
        let lifted = kron(&gate.matrix.conj(), &gate.matrix);
        Self {
            gate,
            lifted,
            normalization,
        }
    }

    pub fn norm(&self) -> f64 {
        match self.normalization {
            OpenNormalization::Superoperator => self.gate.norm().powi(2),
            OpenNormalization::Literal => self.gate.norm(),
        }
    }

    pub fn superop_dim(&self) -> usize {
        self.lifted.dim()
    }
}

fn check_controls(model: &LindbladModel, schedule: &ControlSchedule) -> Result<()> {
    if schedule.controls() != model.hamiltonian.control_count() {
        return Err(Error::DimensionMismatch {
            expected: model.hamiltonian.control_count(),
            found: schedule.controls(),
        });
    }
    Ok(())
}

fn chain_from_resolved(res: &ResolvedLindblad, schedule: &ControlSchedule) -> Result<ChannelChain> {
    let dt = schedule.dt();
    let n = schedule.intervals();
    let mut steps = Vec::with_capacity(n);
    let mut forward: Vec<CMatrix> = Vec::with_capacity(n);
    for j in 0..n {
        let g = expm(&res.at(&schedule.amplitudes(j)).scale_real(dt))?;
        let a = match forward.last() {
            Some(prev) => g.matmul(prev),
            None => g.clone(),
        };
        steps.push(g);
        forward.push(a);
    }
    Ok(ChannelChain { steps, forward, dt })
}

pub fn propagate_channel(
    model: &LindbladModel,
    sample: &UncertaintySample,
    schedule: &ControlSchedule,
) -> Result<ChannelChain> {
    check_controls(model, schedule)?;
    chain_from_resolved(&model.resolve(sample)?, schedule)
}

pub fn open_fidelity(target: &OpenTarget, channel: &CMatrix) -> Result<f64> {
    if channel.dim() != target.superop_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.superop_dim(),
            found: channel.dim(),
        });
    }
    Ok(hs_inner(&target.lifted, channel)?.norm() / target.norm())
}

#[derive(Debug, Clone)]
pub(crate) struct OpenSampleEvaluation {
    /// `w = tr(S_F† 𝒢(T))`
    pub overlap: C64,
    /// `∂|w|²/∂u`
    pub gradient: Option<Vec<Vec<f64>>>,
}

pub(crate) fn evaluate_open_sample(
    res: &ResolvedLindblad,
    schedule: &ControlSchedule,
    lifted: &CMatrix,
    with_gradient: bool,
) -> Result<OpenSampleEvaluation> {
    let chain = chain_from_resolved(res, schedule)?;
    let overlap = hs_inner(lifted, chain.terminal())?;
    if !with_gradient {
        return Ok(OpenSampleEvaluation {
            overlap,
            gradient: None,
        });
    }
    let n = schedule.intervals();
    let mut grad = vec![vec![0.0; n]; res.controls.len()];
    let factor = overlap.conj() * chain.dt;
    let mut b = lifted.clone();
    for j in (0..n).rev() {
        let p = chain.forward[j].mul_adjoint(&b);
        for (g, k) in grad.iter_mut().zip(&res.controls) {
            g[j] = 2.0 * (factor * k.trace_of_product(&p)).re;
        }
        b = chain.steps[j].adjoint_mul(&b);
    }
    Ok(OpenSampleEvaluation {
        overlap,
        gradient: Some(grad),
    })
}

/// `∂|tr(S_F† 𝒢(T))|²/∂u_m(j)` to first order in `Δt`.
pub fn open_gradient(
    model: &LindbladModel,
    sample: &UncertaintySample,
    schedule: &ControlSchedule,
    target: &OpenTarget,
) -> Result<Vec<Vec<f64>>> {
    check_controls(model, schedule)?;
    if model.dim() * model.dim() != target.superop_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim() * model.dim(),
            found: target.superop_dim(),
        });
    }
    let e = evaluate_open_sample(&model.resolve(sample)?, schedule, &target.lifted, true)?;
    Ok(e.gradient.unwrap())
}

/// Fixed-step ascent of the open-system objective averaged over `samples`
/// (a single nominal sample gives plain open GRAPE).
pub fn open_optimize(
    model: &LindbladModel,
    samples: &[UncertaintySample],
    initial: &ControlSchedule,
    target: &OpenTarget,
    objective: OpenObjective,
    config: &OptimizationConfig,
) -> Result<OptimizationReport> {
    check_controls(model, initial)?;
    let backend = Backend::Open {
        model: model.clone(),
        normalization: target.normalization,
        objective,
    };
    let problem = AugmentedProblem::new(
        &backend,
        samples,
        &target.gate,
        Objective::MeanPhi,
        Execution::default(),
    )?;
    ascend(&problem, initial, config)
}

/// `ρ ↦ unvec(G vec(ρ))`.
pub fn apply_channel(channel: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    if channel.dim() != rho.dim() * rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim() * rho.dim(),
            found: channel.dim(),
        });
    }
    CMatrix::unvectorize(&channel.apply(&rho.vectorize()))
}

/// Choi matrix `Σ_ij E_ij ⊗ 𝓔(E_ij)`; positive semidefinite iff the channel
/// is completely positive.
pub fn choi_matrix(channel: &CMatrix) -> Result<CMatrix> {
    let dd = channel.dim();
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: dd,
        });
    }
    let mut c = CMatrix::zeros(dd);
    for i in 0..d {
        for j in 0..d {
            // vec(E_ij) is the unit vector at j·d + i
            for k in 0..d {
                for l in 0..d {
                    c[(i * d + k, j * d + l)] = channel[(l * d + k, j * d + i)];
                }
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grape;
    use crate::linalg::{ONE, ZERO};
    use crate::model::{
        sigma_minus, sigma_x, sigma_z, standard_gate, Bounds, CollapseTerm, ControlTerm, DriftTerm,
        GateName, HamiltonianModel, UnitSystem,
    };
    use crate::pulse::{init_schedule, InitialField};

    fn hamiltonian() -> HamiltonianModel {
        HamiltonianModel::new(
            vec![DriftTerm {
                operator: sigma_z(),
                coefficient: 1.0,
                channel: None,
            }],
            vec![ControlTerm {
                name: "x".into(),
                operator: sigma_x(),
                channel: None,
                bounds: Bounds::new(-5.0, 5.0),
            }],
            UnitSystem::AtomicUnits,
        )
        .unwrap()
    }

    fn lindblad(gamma1: f64, gamma_phi: f64) -> LindbladModel {
        LindbladModel::new(
            hamiltonian(),
            vec![
                CollapseTerm {
                    operator: sigma_minus(),
                    rate: gamma1,
                    channel: None,
                },
                CollapseTerm {
                    operator: sigma_z(),
                    rate: gamma_phi,
                    channel: None,
                },
            ],
        )
        .unwrap()
    }

    fn nominal() -> UncertaintySample {
        UncertaintySample::nominal()
    }

    #[test]
    fn closed_limit_matches_unitary_conjugation() {
        let s = init_schedule(&[InitialField::sin_scaled(2.0)], &hamiltonian(), 3.0, 30).unwrap();
        let g = propagate_channel(&lindblad(0.0, 0.0), &nominal(), &s).unwrap();
        let u = grape::propagate(&hamiltonian(), &nominal(), &s).unwrap();
        let lift = kron(&u.terminal().conj(), u.terminal());
        assert!((g.terminal() - &lift).max_abs() < 1e-9);
    }

    #[test]
    fn near_zero_duration_is_identity() {
        let s = ControlSchedule::new(1e-15, vec![vec![3.0]]).unwrap();
        let g = propagate_channel(&lindblad(0.2, 0.1), &nominal(), &s).unwrap();
        assert!((g.terminal() - &CMatrix::identity(4)).max_abs() < 1e-13);
    }

    #[test]
    fn pure_dephasing_decays_coherence() {
        let gamma = 0.05;
        let t = 4.0;
        let ham = HamiltonianModel::new(
            vec![DriftTerm {
                operator: sigma_z(),
                coefficient: 0.0,
                channel: None,
            }],
            vec![ControlTerm {
                name: "x".into(),
                operator: sigma_x(),
                channel: None,
                bounds: Bounds::new(-1.0, 1.0),
            }],
            UnitSystem::AtomicUnits,
        )
        .unwrap();
        let model = LindbladModel::new(
            ham,
            vec![CollapseTerm {
                operator: sigma_z(),
                rate: gamma,
                channel: None,
            }],
        )
        .unwrap();
        let s = ControlSchedule::zeros(t, 1, 8).unwrap();
        let g = propagate_channel(&model, &nominal(), &s).unwrap();
        let rho = CMatrix::from_rows([
            [C64::new(0.5, 0.0), C64::new(0.3, 0.2)],
            [C64::new(0.3, -0.2), C64::new(0.5, 0.0)],
        ]);
        let out = apply_channel(g.terminal(), &rho).unwrap();
        assert!((out[(0, 1)] - rho[(0, 1)] * (-2.0 * gamma * t).exp()).norm() < 1e-13);
    }

    #[test]
    fn open_fidelity_examples() {
        let h = OpenTarget::new(standard_gate(GateName::H).unwrap());
        assert!((open_fidelity(&h, &h.lifted.clone()).unwrap() - 1.0).abs() < 1e-15);
        let phased = h.gate.matrix.scale(C64::from_polar(1.0, 0.9));
        let lift = kron(&phased.conj(), &phased);
        assert!((open_fidelity(&h, &lift).unwrap() - 1.0).abs() < 1e-15);

        // ρ ↦ tr(ρ) I/2 has superoperator vec(I) vec(I)ᵀ / 2
        let v = CMatrix::identity(2).vectorize();
        let mut dep = CMatrix::zeros(4);
        for r in 0..4 {
            for c in 0..4 {
                dep[(r, c)] = v[r] * v[c] * 0.5;
            }
        }
        let id = OpenTarget::new(TargetGate::custom(CMatrix::identity(2)).unwrap());
        assert!((open_fidelity(&id, &dep).unwrap() - 0.25).abs() < 1e-15);

        let literal = OpenTarget::with_normalization(h.gate.clone(), OpenNormalization::Literal);
        assert!((open_fidelity(&literal, &h.lifted).unwrap() - 2.0).abs() < 1e-15);
        assert!(open_fidelity(&h, &CMatrix::identity(2)).is_err());
    }

    #[test]
    fn gradient_in_closed_limit_is_parallel_to_unitary_gradient() {
        let h = standard_gate(GateName::H).unwrap();
        let target = OpenTarget::new(h.clone());
        for seed in 0..6 {
            let s = init_schedule(
                &[InitialField::Random {
                    seed,
                    lo: -3.0,
                    hi: 3.0,
                }],
                &hamiltonian(),
                2.0,
                25,
            )
            .unwrap();
            let open = open_gradient(&lindblad(0.0, 0.0), &nominal(), &s, &target).unwrap();
            let closed = grape::gradient(&hamiltonian(), &nominal(), &s, &h).unwrap();
            let (a, b): (Vec<f64>, Vec<f64>) = (open.concat(), closed.concat());
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(dot / (na * nb) >= 0.999, "cosine {}", dot / (na * nb));
        }
    }

    #[test]
    fn open_gradient_vanishes_at_exact_optimum() {
        let m = hamiltonian();
        let s = init_schedule(&[InitialField::sin_scaled(1.5)], &m, 2.0, 20).unwrap();
        let u = grape::propagate(&m, &nominal(), &s)
            .unwrap()
            .terminal()
            .clone();
        let target = OpenTarget::new(TargetGate::custom(u).unwrap());
        let g = open_gradient(&lindblad(0.0, 0.0), &nominal(), &s, &target).unwrap();
        assert!(g.iter().flatten().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn zero_iterations_keeps_initial_fidelity() {
        let model = lindblad(1e-3, 1e-2);
        let target = OpenTarget::new(standard_gate(GateName::S).unwrap());
        let s = init_schedule(
            &[InitialField::sin_scaled(1.0)],
            &model.hamiltonian,
            5.0,
            40,
        )
        .unwrap();
        let report = open_optimize(
            &model,
            &[nominal()],
            &s,
            &target,
            OpenObjective::SquaredOverlap,
            &OptimizationConfig::new(0.1, 0, 0.0),
        )
        .unwrap();
        let f0 = open_fidelity(
            &target,
            propagate_channel(&model, &nominal(), &s)
                .unwrap()
                .terminal(),
        )
        .unwrap();
        assert_eq!(report.fidelity_trace, vec![f0]);
    }

    #[test]
    fn choi_of_identity_channel_is_rank_one() {
        let c = choi_matrix(&CMatrix::identity(4)).unwrap();
        // |Ω⟩⟨Ω| with |Ω⟩ = |00⟩ + |11⟩
        let omega = [ONE, ZERO, ZERO, ONE];
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(c[(r, col)], omega[r] * omega[col]);
            }
        }
    }
}
