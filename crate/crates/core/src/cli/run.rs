//! Running experiments and writing their artifacts.
//!
//! A run directory holds `convergence.csv`, `pulses.csv` and `report.json`;
//! a sweep adds `sweep.csv` and one sub-directory per sweep point.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::config::{ExperimentConfig, SweepParam};
use crate::error::Result;
use crate::grape::{self, OptimizationReport, Termination};
use crate::model::{GateName, UncertaintyModel, UncertaintySample};
use crate::pulse::fmt_f64;
use crate::slc::{self, Backend, TestReport};

/// Lower clamp for `log10_infidelity` so converged rows stay finite.
pub const LOG_FLOOR: f64 = f64::EPSILON;

/// Contents of `report.json`. Contains no timings, so identical inputs give
/// identical files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub target: GateName,
    pub dynamics: &'static str,
    pub total_time: f64,
    pub intervals: usize,
    pub controls: usize,
    pub training_samples: usize,
    pub step_size: f64,
    pub max_iterations: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub initial_fidelity: f64,
    pub final_fidelity: f64,
    pub final_infidelity: f64,
    pub target_infidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub training: OptimizationReport,
    pub summary: RunSummary,
}

/// Trains (and tests, if the config has uncertainty channels) without
/// touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    let exp = config.build()?;
    let uncertainty = exp.uncertainty.clone().unwrap_or_default();
    let training = match &exp.backend {
        Backend::Unitary(model) if uncertainty.is_empty() => grape::optimize(
            model,
            &UncertaintySample::nominal(),
            &exp.initial,
            &exp.target,
            &exp.optimizer,
        )?,
        backend => slc::train(
            backend,
            &uncertainty,
            &exp.initial,
            &exp.target,
            exp.objective,
            &exp.optimizer,
        )?,
    };
    let test = match &exp.uncertainty {
        Some(u) if !u.is_empty() => Some(slc::test(
            &exp.backend,
            u,
            &training.schedule,
            &exp.target,
            exp.test_samples,
            exp.optimizer.seed,
        )?),
        _ => None,
    };
    let summary = RunSummary {
        name: config.name.clone(),
        target: config.target,
        dynamics: if exp.is_open() { "lindblad" } else { "unitary" },
        total_time: config.time.total,
        intervals: config.time.intervals,
        controls: exp.initial.controls(),
        training_samples: sample_count(&uncertainty),
        step_size: exp.optimizer.step_size,
        max_iterations: exp.optimizer.max_iterations,
        iterations: training.iterations,
        termination: training.termination,
        initial_fidelity: training.fidelity_trace[0],
        final_fidelity: training.final_fidelity(),
        final_infidelity: training.final_infidelity(),
        target_infidelity: exp.optimizer.target_infidelity,
        test,
    };
    Ok(RunOutcome { training, summary })
}

fn sample_count(u: &UncertaintyModel) -> usize {
    slc::training_grid(u).len()
}

/// [`execute`] followed by [`write_artifacts`].
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    write_artifacts(&outcome, out)?;
    Ok(outcome)
}

pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_convergence(
        &outcome.training.fidelity_trace,
        BufWriter::new(File::create(dir.join("convergence.csv"))?),
    )?;
    let mut pulses = BufWriter::new(File::create(dir.join("pulses.csv"))?);
    outcome.training.schedule.write_csv(&mut pulses)?;
    pulses.flush()?;
    let mut report = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut report, &outcome.summary)?;
    report.write_all(b"\n")?;
    report.flush()?;
    Ok(())
}

/// `iteration,fidelity,infidelity,log10_infidelity`, one row per trace entry.
pub fn write_convergence<W: Write>(trace: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "fidelity", "infidelity", "log10_infidelity"])?;
    for (k, &f) in trace.iter().enumerate() {
        let inf = 1.0 - f;
        w.write_record([
            k.to_string(),
            fmt_f64(f),
            fmt_f64(inf),
            fmt_f64(inf.max(LOG_FLOOR).log10()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub iterations: usize,
    pub train_fidelity: f64,
    pub train_infidelity: f64,
    pub test: Option<TestReport>,
}

impl SweepPoint {
    /// The number a sweep plot shows: the test mean when there is one.
    pub fn fidelity(&self) -> f64 {
        self.test.as_ref().map_or(self.train_fidelity, |t| t.mean)
    }
}

/// Runs one experiment per value. With `out`, each point's artifacts land in
/// `<out>/<param>_<k>/` next to a combined `sweep.csv`.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    let configs = values
        .iter()
        .map(|&v| config.with_param(param, v))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(values.len());
    for (k, (c, &value)) in configs.iter().zip(values).enumerate() {
        let outcome = execute(c)?;
        if let Some(dir) = out {
            write_artifacts(&outcome, &point_dir(dir, param, k))?;
        }
        points.push(SweepPoint {
            value,
            iterations: outcome.summary.iterations,
            train_fidelity: outcome.summary.final_fidelity,
            train_infidelity: outcome.summary.final_infidelity,
            test: outcome.summary.test,
        });
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_sweep(
            param,
            &points,
            BufWriter::new(File::create(dir.join("sweep.csv"))?),
        )?;
    }
    Ok(points)
}

fn point_dir(dir: &Path, param: SweepParam, k: usize) -> PathBuf {
    dir.join(format!("{}_{k:02}", param.to_string().replace('-', "_")))
}

/// `param,value,iterations,train_fidelity,train_infidelity,log10_train_infidelity,
/// test_mean,test_min,test_max,test_std`; test columns are empty without
/// uncertainty channels.
pub fn write_sweep<W: Write>(param: SweepParam, points: &[SweepPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "param",
        "value",
        "iterations",
        "train_fidelity",
        "train_infidelity",
        "log10_train_infidelity",
        "test_mean",
        "test_min",
        "test_max",
        "test_std",
    ])?;
    for p in points {
        let test =
            |f: fn(&TestReport) -> f64| p.test.as_ref().map(|t| fmt_f64(f(t))).unwrap_or_default();
        w.write_record([
            param.to_string(),
            fmt_f64(p.value),
            p.iterations.to_string(),
            fmt_f64(p.train_fidelity),
            fmt_f64(p.train_infidelity),
            fmt_f64(p.train_infidelity.max(LOG_FLOOR).log10()),
            test(|t| t.mean),
            test(|t| t.min),
            test(|t| t.max),
            test(|t| t.std_dev),
        ])?;
    }
    w.flush()?;
    Ok(())
}
