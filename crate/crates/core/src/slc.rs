//! Sampling-based learning control.
//!
//! Training runs gradient ascent on the augmented system: one shared
//! schedule drives every sample of a deterministic grid over the uncertainty
//! channels, and the ascent direction is the sample mean of the per-sample
//! gradients. Testing applies the trained schedule to randomly drawn samples
//! and summarises the fidelities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{
    ascend, evaluate_sample, ControlProblem, Evaluation, OptimizationConfig, OptimizationReport,
};
use crate::lindblad::{evaluate_open_sample, OpenNormalization, OpenObjective, OpenTarget};
use crate::model::{
    Bounds, HamiltonianModel, LindbladModel, ResolvedHamiltonian, ResolvedLindblad, TargetGate,
    TestDistribution, UncertaintyChannel, UncertaintyModel,
};
use crate::parallel::Execution;
use crate::pulse::ControlSchedule;

pub use crate::model::UncertaintySample;

/// Grid values along one channel: midpoints of `N_k` equal cells covering
/// `[1 - E, 1 + E]`, i.e. `(1 - E) + (E / N_k)(2m - 1)` for `m = 1..=N_k`.
pub fn channel_grid(channel: &UncertaintyChannel) -> Vec<f64> {
    let n = channel.grid_count;
    let e = channel.bound;
    let mut values: Vec<f64> = (1..=n)
        .map(|m| (1.0 - e) + (e / n as f64) * (2 * m - 1) as f64)
        .collect();
    values.dedup();
    values
}

/// Cartesian product of the per-channel grids; the first channel varies
/// slowest.
pub fn training_grid(uncertainty: &UncertaintyModel) -> Vec<UncertaintySample> {
    let mut samples = vec![Vec::with_capacity(uncertainty.len())];
    for channel in &uncertainty.channels {
        let values = channel_grid(channel);
        samples = samples
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut s = prefix.clone();
                    s.push(v);
                    s
                })
            })
            .collect();
    }
    samples.into_iter().map(UncertaintySample::new).collect()
}

/// What the training loop ascends. Both share their maximisers at `F_n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Mean of the per-sample `Φ_n` (or its open-system counterpart).
    #[default]
    MeanPhi,
    /// Mean of the per-sample fidelities `F_n`.
    MeanFidelity,
}

/// The dynamics every sample is propagated under.
#[derive(Debug, Clone)]
pub enum Backend {
    Unitary(HamiltonianModel),
    Open {
        model: LindbladModel,
        normalization: OpenNormalization,
        objective: OpenObjective,
    },
}

impl Backend {
    pub fn hamiltonian(&self) -> &HamiltonianModel {
        match self {
            Backend::Unitary(m) => m,
            Backend::Open { model, .. } => &model.hamiltonian,
        }
    }
}

enum ResolvedSample {
    Unitary(ResolvedHamiltonian),
    Open(ResolvedLindblad),
}

#[allow(clippy::large_enum_variant)]
enum TargetForm {
    Unitary(TargetGate),
    Open {
        target: OpenTarget,
        objective: OpenObjective,
    },
}

/// One shared schedule driving every sample of an ensemble.
pub struct AugmentedProblem {
    samples: Vec<ResolvedSample>,
    target: TargetForm,
    bounds: Vec<Bounds>,
    objective: Objective,
    execution: Execution,
}

impl AugmentedProblem {
    pub fn new(
        backend: &Backend,
        samples: &[UncertaintySample],
        target: &TargetGate,
        objective: Objective,
        execution: Execution,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Model(
                "augmented system needs at least one sample".into(),
            ));
        }
        let ham = backend.hamiltonian();
        if ham.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: ham.dim(),
                found: target.dim(),
            });
        }
        let (resolved, target) = match backend {
            Backend::Unitary(model) => (
                samples
                    .iter()
                    .map(|s| ResolvedSample::Unitary(model.resolve(s)))
                    .collect(),
                TargetForm::Unitary(target.clone()),
            ),
            Backend::Open {
                model,
                normalization,
                objective,
            } => (
                samples
                    .iter()
                    .map(|s| model.resolve(s).map(ResolvedSample::Open))
                    .collect::<Result<Vec<_>>>()?,
                TargetForm::Open {
                    target: OpenTarget::with_normalization(target.clone(), *normalization),
                    objective: *objective,
                },
            ),
        };
        Ok(Self {
            samples: resolved,
            target,
            bounds: ham.bounds(),
            objective,
            execution,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Per-sample fidelity and, optionally, the gradient of that sample's
    /// share of the objective.
    fn evaluate_one(
        &self,
        sample: &ResolvedSample,
        schedule: &ControlSchedule,
        with_gradient: bool,
    ) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
        match (sample, &self.target) {
            (ResolvedSample::Unitary(ham), TargetForm::Unitary(target)) => {
                let e = evaluate_sample(ham, schedule, target, with_gradient)?;
                let modulus = e.overlap.norm();
                let f = modulus / target.norm();
                let g = e.phi_gradient.map(|mut g| {
                    if self.objective == Objective::MeanFidelity {
                        // F = |z| / 2^q, Φ = |z|²
                        rescale(&mut g, safe_inverse(2.0 * modulus * target.norm()));
                    }
                    g
                });
                Ok((f, g))
            }
            (ResolvedSample::Open(res), TargetForm::Open { target, objective }) => {
                let e = evaluate_open_sample(res, schedule, &target.lifted, with_gradient)?;
                let modulus = e.overlap.norm();
                let f = modulus / target.norm();
                let g = e.gradient.map(|mut g| {
                    let factor = match (self.objective, objective) {
                        (Objective::MeanFidelity, _) => safe_inverse(2.0 * modulus * target.norm()),
                        (Objective::MeanPhi, OpenObjective::Overlap) => safe_inverse(2.0 * modulus),
                        (Objective::MeanPhi, OpenObjective::SquaredOverlap) => 1.0,
                    };
                    if factor != 1.0 {
                        rescale(&mut g, factor);
                    }
                    g
                });
                Ok((f, g))
            }
            _ => unreachable!("sample and target resolved from the same backend"),
        }
    }

    /// Fidelity of every sample, in sample order.
    pub fn fidelities(&self, schedule: &ControlSchedule) -> Result<Vec<f64>> {
        self.execution
            .map(&self.samples, |s| {
                self.evaluate_one(s, schedule, false).map(|(f, _)| f)
            })
            .into_iter()
            .collect()
    }
}

fn safe_inverse(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        0.0
    }
}

fn rescale(g: &mut [Vec<f64>], factor: f64) {
    for row in g {
        for x in row {
            *x *= factor;
        }
    }
}

impl ControlProblem for AugmentedProblem {
    fn bounds(&self) -> Vec<Bounds> {
        self.bounds.clone()
    }

    fn evaluate(&self, schedule: &ControlSchedule, with_gradient: bool) -> Result<Evaluation> {
        if schedule.controls() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                found: schedule.controls(),
            });
        }
        let per_sample = self.execution.map(&self.samples, |s| {
            self.evaluate_one(s, schedule, with_gradient)
        });
        // fixed-order reduction
        let n = per_sample.len() as f64;
        let mut fidelity = 0.0;
        let mut gradient =
            with_gradient.then(|| vec![vec![0.0; schedule.intervals()]; schedule.controls()]);
        for result in per_sample {
            let (f, g) = result?;
            fidelity += f;
            if let (Some(acc), Some(g)) = (gradient.as_mut(), g) {
                for (a_row, g_row) in acc.iter_mut().zip(g) {
                    for (a, x) in a_row.iter_mut().zip(g_row) {
                        *a += x;
                    }
                }
            }
        }
        if let Some(acc) = gradient.as_mut() {
            rescale(acc, 1.0 / n);
        }
        Ok(Evaluation {
            fidelity: fidelity / n,
            gradient,
        })
    }
}

/// `F_N = (1/N) Σ_n F(U_F, U_n(T))`.
pub fn augmented_fidelity(
    model: &HamiltonianModel,
    samples: &[UncertaintySample],
    schedule: &ControlSchedule,
    target: &TargetGate,
) -> Result<f64> {
    let problem = AugmentedProblem::new(
        &Backend::Unitary(model.clone()),
        samples,
        target,
        Objective::MeanPhi,
        Execution::default(),
    )?;
    Ok(problem.evaluate(schedule, false)?.fidelity)
}

/// Sample mean of the per-sample gradients of the chosen objective.
pub fn augmented_gradient(
    model: &HamiltonianModel,
    samples: &[UncertaintySample],
    schedule: &ControlSchedule,
    target: &TargetGate,
    objective: Objective,
) -> Result<Vec<Vec<f64>>> {
    let problem = AugmentedProblem::new(
        &Backend::Unitary(model.clone()),
        samples,
        target,
        objective,
        Execution::default(),
    )?;
    Ok(problem.evaluate(schedule, true)?.gradient.unwrap())
}

/// Gradient ascent on the augmented system built from the training grid.
pub fn train(
    backend: &Backend,
    uncertainty: &UncertaintyModel,
    initial: &ControlSchedule,
    target: &TargetGate,
    objective: Objective,
    config: &OptimizationConfig,
) -> Result<OptimizationReport> {
    train_with(
        backend,
        uncertainty,
        initial,
        target,
        objective,
        config,
        Execution::default(),
    )
}

pub fn train_with(
    backend: &Backend,
    uncertainty: &UncertaintyModel,
    initial: &ControlSchedule,
    target: &TargetGate,
    objective: Objective,
    config: &OptimizationConfig,
    execution: Execution,
) -> Result<OptimizationReport> {
    uncertainty.validate()?;
    let grid = training_grid(uncertainty);
    let problem = AugmentedProblem::new(backend, &grid, target, objective, execution)?;
    ascend(&problem, initial, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std_dev: f64,
    pub histogram: Vec<HistogramBucket>,
    pub seed: u64,
}

impl TestReport {
    pub fn from_fidelities(fidelities: &[f64], seed: u64) -> Self {
        const BUCKETS: usize = 10;
        let count = fidelities.len();
        let n = count as f64;
        let mean = fidelities.iter().sum::<f64>() / n;
        let min = fidelities.iter().copied().fold(f64::INFINITY, f64::min);
        let max = fidelities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mean, var) = if max > min {
            (
                mean,
                fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n,
            )
        } else {
            (min, 0.0)
        };
        let histogram = if max > min {
            let width = (max - min) / BUCKETS as f64;
            let mut counts = [0usize; BUCKETS];
            for f in fidelities {
                let k = (((f - min) / width) as usize).min(BUCKETS - 1);
                counts[k] += 1;
            }
            counts
                .iter()
                .enumerate()
                .map(|(k, &c)| HistogramBucket {
                    lo: min + width * k as f64,
                    hi: if k + 1 == BUCKETS {
                        max
                    } else {
                        min + width * (k + 1) as f64
                    },
                    count: c,
                })
                .collect()
        } else {
            vec![HistogramBucket {
                lo: min,
                hi: max,
                count,
            }]
        };
        Self {
            count,
            mean: mean.clamp(min, max),
            min,
            max,
            std_dev: var.sqrt(),
            histogram,
            seed,
        }
    }
}

fn draw(channel: &UncertaintyChannel, rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = channel.range();
    if channel.bound == 0.0 {
        return 1.0;
    }
    match channel.distribution {
        TestDistribution::Uniform => rng.random_range(lo..=hi),
        TestDistribution::Gaussian { sigma } => {
            let normal = Normal::new(1.0, sigma).expect("sigma validated positive");
            // truncation by rejection; acceptance is at least ~68% for sigma <= E
            loop {
                let x = normal.sample(rng);
                if (lo..=hi).contains(&x) {
                    return x;
                }
            }
        }
    }
}

/// `count` random samples drawn from the channels' test distributions with a
/// ChaCha8 stream seeded by `seed`.
pub fn draw_test_samples(
    uncertainty: &UncertaintyModel,
    count: usize,
    seed: u64,
) -> Vec<UncertaintySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            UncertaintySample::new(
                uncertainty
                    .channels
                    .iter()
                    .map(|c| draw(c, &mut rng))
                    .collect(),
            )
        })
        .collect()
}

/// Monte-Carlo evaluation of a fixed schedule.
pub fn test(
    backend: &Backend,
    uncertainty: &UncertaintyModel,
    schedule: &ControlSchedule,
    target: &TargetGate,
    count: usize,
    seed: u64,
) -> Result<TestReport> {
    test_with(
        backend,
        uncertainty,
        schedule,
        target,
        count,
        seed,
        Execution::default(),
    )
}

pub fn test_with(
    backend: &Backend,
    uncertainty: &UncertaintyModel,
    schedule: &ControlSchedule,
    target: &TargetGate,
    count: usize,
    seed: u64,
    execution: Execution,
) -> Result<TestReport> {
    if count == 0 {
        return Err(Error::Model("test needs at least one sample".into()));
    }
    uncertainty.validate()?;
    let samples = draw_test_samples(uncertainty, count, seed);
    let problem = AugmentedProblem::new(backend, &samples, target, Objective::MeanPhi, execution)?;
    let fidelities = problem.fidelities(schedule)?;
    Ok(TestReport::from_fidelities(&fidelities, seed))
}
