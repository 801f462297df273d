//! Oracles built on nalgebra, independent of the crate's own linear algebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_gates::linalg::CMatrix;
use robust_gates::model::{
    sigma_x, sigma_z, Bounds, ChannelId, ControlTerm, DriftTerm, HamiltonianModel, UnitSystem,
};
use robust_gates::pulse::ControlSchedule;

pub type C = Complex64;

/// `H = ε₀ ω₀ σ_z + ε₁ u σ_x` with `ω₀ = 1` and `u ∈ [-5, 5]`.
pub fn one_qubit_model(robust: bool) -> HamiltonianModel {
    HamiltonianModel::new(
        vec![DriftTerm {
            operator: sigma_z(),
            coefficient: 1.0,
            channel: robust.then_some(ChannelId(0)),
        }],
        vec![ControlTerm {
            name: "omega_x".into(),
            operator: sigma_x(),
            channel: robust.then_some(ChannelId(1)),
            bounds: Bounds::new(-5.0, 5.0),
        }],
        UnitSystem::AtomicUnits,
    )
    .unwrap()
}

/// `exp(-iΔt(aσ_z + bσ_x)) = cos(rΔt) I − i sin(rΔt)/r (aσ_z + bσ_x)`.
pub fn closed_form_step(a: f64, b: f64, dt: f64) -> Matrix2<C> {
    let r = (a * a + b * b).sqrt();
    let (c, s) = (
        (r * dt).cos(),
        if r == 0.0 { dt } else { (r * dt).sin() / r },
    );
    let mi = C::new(0.0, -s);
    Matrix2::new(
        C::new(c, 0.0) + mi * a,
        mi * b,
        mi * b,
        C::new(c, 0.0) - mi * a,
    )
}

/// `U(T)` for the one-qubit model under drift and control multipliers.
pub fn one_qubit_propagator(schedule: &ControlSchedule, eps: (f64, f64)) -> Matrix2<C> {
    let dt = schedule.dt();
    schedule
        .control(0)
        .iter()
        .fold(Matrix2::identity(), |acc, &u| {
            closed_form_step(eps.0, eps.1 * u, dt) * acc
        })
}

pub fn to_nalgebra(m: &CMatrix) -> DMatrix<C> {
    DMatrix::from_fn(m.dim(), m.dim(), |i, j| m[(i, j)])
}

pub fn matrix2(m: &CMatrix) -> Matrix2<C> {
    Matrix2::from_fn(|i, j| m[(i, j)])
}

/// `|tr(U_F† U)|²`.
pub fn phi2(target: &Matrix2<C>, u: &Matrix2<C>) -> f64 {
    (target.adjoint() * u).trace().norm_sqr()
}

/// Central differences of `f` with respect to every schedule entry.
pub fn finite_difference<F>(schedule: &ControlSchedule, h: f64, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&ControlSchedule) -> f64,
{
    let mut out = vec![vec![0.0; schedule.intervals()]; schedule.controls()];
    for (m, row) in out.iter_mut().enumerate() {
        for (j, g) in row.iter_mut().enumerate() {
            let x = schedule.get(m, j);
            let mut s = schedule.clone();
            s.set(m, j, x + h);
            let plus = f(&s);
            s.set(m, j, x - h);
            *g = (plus - f(&s)) / (2.0 * h);
        }
    }
    out
}

/// `max |a − b| / max |b|`.
pub fn relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let diff = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().flatten().map(|y| y.abs()).fold(0.0, f64::max);
    diff / scale
}

pub fn random_schedule(
    rng: &mut ChaCha8Rng,
    total: f64,
    controls: usize,
    intervals: usize,
    amp: f64,
) -> ControlSchedule {
    let values = (0..controls)
        .map(|_| {
            (0..intervals)
                .map(|_| rng.random_range(-amp..amp))
                .collect()
        })
        .collect();
    ControlSchedule::new(total, values).unwrap()
}

/// Same piecewise-constant function on a grid with `factor` times as many
/// intervals.
pub fn refine(schedule: &ControlSchedule, factor: usize) -> ControlSchedule {
    let values = schedule
        .values()
        .iter()
        .map(|row| {
            row.iter()
                .flat_map(|&v| std::iter::repeat_n(v, factor))
                .collect()
        })
        .collect();
    ControlSchedule::new(schedule.total_time(), values).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian `d × d` with entries of order `scale`.
pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(d);
    for i in 0..d {
        m[(i, i)] = C::new(rng.random_range(-scale..scale), 0.0);
        for j in 0..i {
            let z = C::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            );
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Random density matrix `AA†/tr(AA†)`.
pub fn random_density(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let rho = a.mul_adjoint(&a);
    let t = rho.trace().re;
    rho.scale_real(1.0 / t)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = to_nalgebra(m);
    let h = (&h + h.adjoint()) * C::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Random open system of dimension `d`: Hermitian drift, two Hermitian
/// controls, two arbitrary collapse operators with rates in `[0, max_rate)`.
pub fn random_lindblad(
    rng: &mut ChaCha8Rng,
    d: usize,
    max_rate: f64,
) -> robust_gates::model::LindbladModel {
    use robust_gates::model::{CollapseTerm, LindbladModel};
    let drift = vec![DriftTerm {
        operator: random_hermitian(rng, d, 1.0),
        coefficient: 1.0,
        channel: None,
    }];
    let controls = (0..2)
        .map(|m| ControlTerm {
            name: format!("u{m}"),
            operator: random_hermitian(rng, d, 1.0),
            channel: None,
            bounds: Bounds::new(-5.0, 5.0),
        })
        .collect();
    let h = HamiltonianModel::new(drift, controls, UnitSystem::AtomicUnits).unwrap();
    let collapse = (0..2)
        .map(|_| {
            let mut c = CMatrix::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
            CollapseTerm {
                operator: c,
                rate: if max_rate > 0.0 {
                    rng.random_range(0.0..max_rate)
                } else {
                    0.0
                },
                channel: None,
            }
        })
        .collect();
    LindbladModel::new(h, collapse).unwrap()
}

/// `exp(-iHΔt)` through nalgebra.
pub fn oracle_unitary_step(h: &CMatrix, dt: f64) -> DMatrix<C> {
    (to_nalgebra(h) * C::new(0.0, -dt)).exp()
}

/// `conj(U) ⊗ U`, the column-stacking superoperator of `ρ ↦ UρU†`.
pub fn conjugation_superop(u: &DMatrix<C>) -> DMatrix<C> {
    u.conjugate().kronecker(u)
}

pub fn max_abs_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
