//! Acceptance suite. Each test prints one `PASS` or `FAIL` line with the
//! measured quantity, then asserts.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order and get meaningful timings.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::*;
use robust_gates::cli::{self, ExperimentConfig, RunOutcome, SweepParam};
use robust_gates::grape;
use robust_gates::lindblad::{apply_channel, choi_matrix, propagate_channel};
use robust_gates::model::{hamiltonian_at, standard_gate, GateName, UncertaintySample};
use robust_gates::pulse::ControlSchedule;

fn verdict(criterion: &str, pass: bool, measured: String) {
    println!(
        "{} {criterion}: {measured}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {measured}");
}

fn timed_run(name: &str) -> (RunOutcome, Duration) {
    let config = cli::preset(name).unwrap();
    let start = Instant::now();
    let outcome = cli::execute(&config).unwrap();
    (outcome, start.elapsed())
}

#[test]
fn unitary_grape_converges() {
    let mut pass = true;
    let mut measured = Vec::new();
    for name in [
        "one_qubit_H_optimal",
        "one_qubit_S_optimal",
        "one_qubit_T_pi8_optimal",
    ] {
        let (o, t) = timed_run(name);
        let s = &o.summary;
        pass &= s.final_infidelity <= 1e-10 && s.iterations <= 200 && t <= Duration::from_secs(10);
        measured.push(format!(
            "{name} 1-F={:.2e} after {} its in {t:.2?}",
            s.final_infidelity, s.iterations
        ));
    }
    verdict("unitary GRAPE convergence", pass, measured.join("; "));
}

fn gradient_error(schedule: &ControlSchedule) -> f64 {
    let model = one_qubit_model(false);
    let target = standard_gate(GateName::H).unwrap();
    let tm = matrix2(&target.matrix);
    let g = grape::gradient(&model, &UncertaintySample::nominal(), schedule, &target).unwrap();
    let fd = finite_difference(schedule, 1e-6, |s| {
        phi2(&tm, &one_qubit_propagator(s, (1.0, 1.0)))
    });
    relative_error(&g, &fd)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng(2024);
    let (mut worst, mut worst_half) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        // T = 8, N = 200: Δt = 0.04
        let s = random_schedule(&mut rng, 8.0, 1, 200, 5.0);
        worst = worst.max(gradient_error(&s));
        worst_half = worst_half.max(gradient_error(&refine(&s, 2)));
    }
    let ratio = worst / worst_half;
    verdict(
        "gradient correctness",
        worst <= 1e-3 && ratio >= 2.0,
        format!("worst relative error {worst:.3e} at dt=0.04, {worst_half:.3e} at dt=0.02, ratio {ratio:.3}"),
    );
}

#[test]
fn infidelity_does_not_grow_with_terminal_time() {
    let config = cli::preset("h_terminal_time").unwrap();
    let floor = config.optimizer.target_infidelity;
    let times = [1.0, 2.0, 4.0, 8.0];
    let points = cli::sweep(&config, SweepParam::TerminalTime, &times, None).unwrap();
    let achieved: Vec<f64> = points
        .iter()
        .map(|p| p.train_infidelity.max(floor))
        .collect();
    let pass = achieved.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        "terminal-time dependence",
        pass,
        format!(
            "T={times:?} -> 1-F=[{}]",
            achieved
                .iter()
                .map(|x| format!("{x:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn robust_one_qubit_gates_train_and_test() {
    let mut pass = true;
    let mut measured = Vec::new();
    for name in [
        "one_qubit_H_robust",
        "one_qubit_S_robust",
        "one_qubit_T_pi8_robust",
    ] {
        let (o, t) = timed_run(name);
        let test = o.summary.test.as_ref().unwrap();
        pass &= o.summary.final_fidelity >= 0.995
            && test.mean >= 0.995
            && test.count == 2000
            && t <= Duration::from_secs(600);
        measured.push(format!(
            "{name} train {:.5} test {:.5} in {t:.1?}",
            o.summary.final_fidelity, test.mean
        ));
    }
    verdict("robust one-qubit training", pass, measured.join("; "));
}

#[test]
fn more_pulses_help() {
    let config = cli::preset("s_pulse_count").unwrap();
    let points = cli::sweep(&config, SweepParam::PulseCount, &[5.0, 40.0], None).unwrap();
    let (few, many) = (points[0].fidelity(), points[1].fidelity());
    verdict(
        "pulse-count sweep",
        many >= few && many >= 0.995,
        format!("test mean {few:.5} at 5 pulses, {many:.5} at 40"),
    );
}

#[test]
fn wider_fluctuations_cost_fidelity() {
    let config = cli::preset("s_bound").unwrap();
    let bounds = [0.1, 0.2, 0.3];
    let points = cli::sweep(&config, SweepParam::Bound, &bounds, None).unwrap();
    let means: Vec<f64> = points.iter().map(|p| p.fidelity()).collect();
    let pass = means[2] >= 0.99 && means.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        "bound sweep",
        pass,
        format!("E={bounds:?} -> test mean {means:.5?}"),
    );
}

fn trace_row_error(g: &robust_gates::linalg::CMatrix, d: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for col in 0..d * d {
        let s: C = (0..d).map(|i| g[(i * d + i, col)]).sum();
        let expected = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
        worst = worst.max((s - expected).norm());
    }
    worst
}

#[test]
fn open_channels_are_physical() {
    let mut rng = rng(7);
    let (mut trace, mut herm, mut choi_min, mut unitary) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for case in 0..20 {
        let d = if case % 2 == 0 { 2 } else { 4 };
        let model = random_lindblad(&mut rng, d, 1.0);
        let s = random_schedule(&mut rng, 1.0, 2, 5, 2.0);
        let chain = propagate_channel(&model, &UncertaintySample::nominal(), &s).unwrap();
        for g in &chain.steps {
            trace = trace.max(trace_row_error(g, d));
            let rho = random_density(&mut rng, d);
            let out = apply_channel(g, &rho).unwrap();
            trace = trace.max((out.trace() - C::new(1.0, 0.0)).norm());
            herm = herm.max(out.hermiticity_error());
            choi_min = choi_min.min(hermitian_eigenvalues(&choi_matrix(g).unwrap())[0]);
        }

        let closed = random_lindblad(&mut rng, d, 0.0);
        let chain = propagate_channel(&closed, &UncertaintySample::nominal(), &s).unwrap();
        for (j, g) in chain.steps.iter().enumerate() {
            let h = hamiltonian_at(
                &closed.hamiltonian,
                &UncertaintySample::nominal(),
                &s.amplitudes(j),
            )
            .unwrap();
            let expected = conjugation_superop(&oracle_unitary_step(&h, s.dt()));
            unitary = unitary.max(max_abs_diff(&to_nalgebra(g), &expected));
        }
    }
    verdict(
        "open-system invariants",
        trace <= 1e-9 && herm <= 1e-9 && choi_min >= -1e-8 && unitary <= 1e-9,
        format!("trace {trace:.1e}, hermiticity {herm:.1e}, min Choi eigenvalue {choi_min:.1e}, unitary mismatch {unitary:.1e}"),
    );
}

#[test]
fn flux_qubit_gates_reach_high_open_fidelity() {
    let mut pass = true;
    let mut measured = Vec::new();
    for name in [
        "flux_qubit_H_open",
        "flux_qubit_S_open",
        "flux_qubit_T_pi8_open",
    ] {
        let (o, _) = timed_run(name);
        let s = &o.summary;
        pass &= s.final_fidelity >= 0.985 && s.max_iterations <= 80;
        measured.push(format!(
            "{name} {:.5} after {} its",
            s.final_fidelity, s.iterations
        ));
    }
    verdict("open GRAPE flux qubit", pass, measured.join("; "));
}

#[test]
fn cnot_converges() {
    let (o, t) = timed_run("cnot_optimal");
    let trace = &o.training.fidelity_trace;
    let (k, best) = trace
        .iter()
        .map(|f| 1.0 - f)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    verdict(
        "CNOT optimal",
        best <= 1e-8 && trace.len() <= 1001 && t <= Duration::from_secs(120),
        format!(
            "min 1-F={best:.3e} at iteration {k} of {}, final {:.3e}, {t:.1?}",
            trace.len() - 1,
            o.summary.final_infidelity
        ),
    );
}

#[test]
fn robust_cnot_trains_and_tests() {
    let (o, t) = timed_run("cnot_robust");
    let test = o.summary.test.as_ref().unwrap();
    verdict(
        "CNOT robust",
        o.summary.final_fidelity >= 0.99 && test.mean >= 0.99 && test.count == 2000,
        format!(
            "train {:.5} test {:.5} in {t:.1?}",
            o.summary.final_fidelity, test.mean
        ),
    );
}

fn shortened(name: &str, iterations: usize) -> ExperimentConfig {
    let mut c = cli::preset(name).unwrap();
    c.optimizer.iterations = iterations;
    c
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let mut differing = Vec::new();
    let configs = [
        shortened("one_qubit_H_optimal", 200),
        shortened("one_qubit_S_robust", 300),
        shortened("flux_qubit_H_open", 80),
        shortened("cnot_robust", 50),
    ];
    for c in &configs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        cli::run(c, a.path()).unwrap();
        cli::run(c, b.path()).unwrap();
        for file in ["convergence.csv", "pulses.csv", "report.json"] {
            if fs::read(a.path().join(file)).unwrap() != fs::read(b.path().join(file)).unwrap() {
                differing.push(format!("{}/{file}", c.name));
            }
        }
    }
    verdict(
        "determinism",
        differing.is_empty(),
        format!(
            "{} configs x 3 artifacts, differing: {differing:?}",
            configs.len()
        ),
    );
}
