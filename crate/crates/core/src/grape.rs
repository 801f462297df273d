//! Gradient ascent pulse engineering for closed (unitary) dynamics.
//!
//! The objective is the phase-insensitive overlap `Φ = |tr(U_F† U(T))|²`.
//! Its gradient with respect to `u_m(j)` is evaluated to first order in the
//! interval length:
//!
//! ```text
//! ∂Φ/∂u_m(j) ≈ -2 Re{ ⟨B_j| iΔt H_m A_j⟩ ⟨A_j|B_j⟩ }
//! A_j = U_j ⋯ U_1,   B_j = U_{j+1}† ⋯ U_N† U_F
//! ```
//!
//! `Δt` is kept inside the gradient, so step sizes are quoted for that
//! convention: halving `Δt` halves the raw gradient.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hs_inner, unitary_step, CMatrix, C64, I};
use crate::model::{Bounds, HamiltonianModel, ResolvedHamiltonian, TargetGate, UncertaintySample};
use crate::pulse::ControlSchedule;

/// Interval propagators `U_j` and forward products `A_j = U_j ⋯ U_1`.
#[derive(Debug, Clone)]
pub struct PropagatorChain {
    pub steps: Vec<CMatrix>,
    pub forward: Vec<CMatrix>,
    pub dt: f64,
}

impl PropagatorChain {
    /// `U(T) = A_N`.
    pub fn terminal(&self) -> &CMatrix {
        self.forward
            .last()
            .expect("chain has at least one interval")
    }
}

fn check_controls(model_controls: usize, schedule: &ControlSchedule) -> Result<()> {
    if schedule.controls() != model_controls {
        return Err(Error::DimensionMismatch {
            expected: model_controls,
            found: schedule.controls(),
        });
    }
    Ok(())
}

fn chain_from_resolved(
    ham: &ResolvedHamiltonian,
    schedule: &ControlSchedule,
) -> Result<PropagatorChain> {
    let dt = schedule.dt();
    let n = schedule.intervals();
    let mut steps = Vec::with_capacity(n);
    let mut forward: Vec<CMatrix> = Vec::with_capacity(n);
    for j in 0..n {
        let u = unitary_step(&ham.at(&schedule.amplitudes(j)), dt)?;
        let a = match forward.last() {
            Some(prev) => u.matmul(prev),
            None => u.clone(),
        };
        steps.push(u);
        forward.push(a);
    }
    Ok(PropagatorChain { steps, forward, dt })
}

pub fn propagate(
    model: &HamiltonianModel,
    sample: &UncertaintySample,
    schedule: &ControlSchedule,
) -> Result<PropagatorChain> {
    check_controls(model.control_count(), schedule)?;
    chain_from_resolved(&model.resolve(sample), schedule)
}

fn check_target(target: &TargetGate, u: &CMatrix) -> Result<()> {
    if target.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

/// `F = |tr(U_F† U)| / 2^q`.
pub fn fidelity(target: &TargetGate, u: &CMatrix) -> Result<f64> {
    check_target(target, u)?;
    Ok((hs_inner(&target.matrix, u)?.norm() / target.norm()).min(1.0))
}

/// `Φ = |tr(U_F† U)|² = (2^q F)²`.
pub fn phi(target: &TargetGate, u: &CMatrix) -> Result<f64> {
    check_target(target, u)?;
    Ok(hs_inner(&target.matrix, u)?.norm_sqr())
}

/// Result of propagating one sample: the overlap `z = tr(U_F† U(T))` and,
/// when requested, `∂Φ/∂u`.
#[derive(Debug, Clone)]
pub(crate) struct SampleEvaluation {
    pub overlap: C64,
    pub phi_gradient: Option<Vec<Vec<f64>>>,
}

pub(crate) fn evaluate_sample(
    ham: &ResolvedHamiltonian,
    schedule: &ControlSchedule,
    target: &TargetGate,
    with_gradient: bool,
) -> Result<SampleEvaluation> {
    let chain = chain_from_resolved(ham, schedule)?;
    let overlap = hs_inner(&target.matrix, chain.terminal())?;
    if !with_gradient {
        return Ok(SampleEvaluation {
            overlap,
            phi_gradient: None,
        });
    }
    let n = schedule.intervals();
    let mut grad = vec![vec![0.0; n]; ham.controls.len()];
    // -2 Re{ iΔt tr(B† H_m A) · conj(z) }
    let factor = I * chain.dt * overlap.conj();
    let mut b = target.matrix.clone();
    for j in (0..n).rev() {
        let p = chain.forward[j].mul_adjoint(&b);
        for (g, hm) in grad.iter_mut().zip(&ham.controls) {
            g[j] = -2.0 * (factor * hm.trace_of_product(&p)).re;
        }
        b = chain.steps[j].adjoint_mul(&b);
    }
    Ok(SampleEvaluation {
        overlap,
        phi_gradient: Some(grad),
    })
}

/// `∂Φ/∂u_m(j)` for every control and interval. Controls tagged with an
/// uncertainty channel contribute `ε_m H_m`.
pub fn gradient(
    model: &HamiltonianModel,
    sample: &UncertaintySample,
    schedule: &ControlSchedule,
    target: &TargetGate,
) -> Result<Vec<Vec<f64>>> {
    check_controls(model.control_count(), schedule)?;
    if model.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: target.dim(),
        });
    }
    let eval = evaluate_sample(&model.resolve(sample), schedule, target, true)?;
    Ok(eval.phi_gradient.unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Fixed ascent step `α`.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop once `1 - F` drops to this value.
    pub target_infidelity: f64,
    pub seed: u64,
}

impl OptimizationConfig {
    pub fn new(step_size: f64, max_iterations: usize, target_infidelity: f64) -> Self {
        Self {
            step_size,
            max_iterations,
            target_infidelity,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            problems.push(format!("step size {} must be > 0", self.step_size));
        }
        if !(self.target_infidelity >= 0.0) {
            problems.push(format!(
                "target infidelity {} must be >= 0",
                self.target_infidelity
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    /// Fidelity before the first update and after every update.
    pub fidelity_trace: Vec<f64>,
    pub schedule: ControlSchedule,
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
}

impl OptimizationReport {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity_trace.last().unwrap()
    }

    pub fn final_infidelity(&self) -> f64 {
        1.0 - self.final_fidelity()
    }
}

/// Figure of merit in `[0, 1]` plus the direction to ascend.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fidelity: f64,
    pub gradient: Option<Vec<Vec<f64>>>,
}

/// Anything the fixed-step ascent loop can drive.
pub trait ControlProblem: Sync {
    fn bounds(&self) -> Vec<Bounds>;
    fn evaluate(&self, schedule: &ControlSchedule, with_gradient: bool) -> Result<Evaluation>;
}

/// `u ← clip(u + α g)` until the infidelity threshold or the iteration cap.
pub fn ascend<P: ControlProblem + ?Sized>(
    problem: &P,
    initial: &ControlSchedule,
    config: &OptimizationConfig,
) -> Result<OptimizationReport> {
    config.validate()?;
    let start = Instant::now();
    let bounds = problem.bounds();
    if bounds.len() != initial.controls() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            found: initial.controls(),
        });
    }
    let mut schedule = initial.clone();
    schedule.clamp_to(&bounds);

    let mut trace = Vec::with_capacity(config.max_iterations + 1);
    let mut iterations = 0;
    let termination = loop {
        let more = iterations < config.max_iterations;
        let eval = problem.evaluate(&schedule, more)?;
        trace.push(eval.fidelity.clamp(0.0, 1.0));
        if 1.0 - eval.fidelity <= config.target_infidelity {
            break Termination::Converged;
        }
        if !more {
            break Termination::MaxIterations;
        }
        let g = eval.gradient.expect("gradient requested");
        schedule.ascend(config.step_size, &g, &bounds);
        iterations += 1;
    };
    Ok(OptimizationReport {
        fidelity_trace: trace,
        schedule,
        iterations,
        wall_time: start.elapsed(),
        termination,
    })
}

/// Single-sample closed-system problem.
pub struct UnitaryProblem {
    ham: ResolvedHamiltonian,
    bounds: Vec<Bounds>,
    target: TargetGate,
}

impl UnitaryProblem {
    pub fn new(
        model: &HamiltonianModel,
        sample: &UncertaintySample,
        target: &TargetGate,
    ) -> Result<Self> {
        if model.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: target.dim(),
            });
        }
        Ok(Self {
            ham: model.resolve(sample),
            bounds: model.bounds(),
            target: target.clone(),
        })
    }
}

impl ControlProblem for UnitaryProblem {
    fn bounds(&self) -> Vec<Bounds> {
        self.bounds.clone()
    }

    fn evaluate(&self, schedule: &ControlSchedule, with_gradient: bool) -> Result<Evaluation> {
        let e = evaluate_sample(&self.ham, schedule, &self.target, with_gradient)?;
        Ok(Evaluation {
            fidelity: e.overlap.norm() / self.target.norm(),
            gradient: e.phi_gradient,
        })
    }
}

pub fn optimize(
    model: &HamiltonianModel,
    sample: &UncertaintySample,
    initial: &ControlSchedule,
    target: &TargetGate,
    config: &OptimizationConfig,
) -> Result<OptimizationReport> {
    check_controls(model.control_count(), initial)?;
    ascend(
        &UnitaryProblem::new(model, sample, target)?,
        initial,
        config,
    )
}
