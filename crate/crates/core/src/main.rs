use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_gates::cli::{self, ExperimentConfig, RunOutcome, SweepParam};
use robust_gates::Result;

#[derive(Parser)]
#[command(
    name = "robust-gates",
    version,
    about = "Learn robust control pulses for quantum gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (and test) the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir` or `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bundled preset.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the Monte-Carlo test draw.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the iteration budget.
        #[arg(long)]
        iterations: Option<usize>,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Repeat an experiment over values of one parameter. `config` may be
    /// a file or a preset name.
    Sweep {
        config: String,
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// List bundled presets.
    ListPresets,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out } => {
            let c = cli::load_config(&config)?;
            let dir = out_dir(&c, out);
            report(&cli::run(&c, &dir)?, &dir);
        }
        Command::Preset {
            name,
            out,
            seed,
            iterations,
            print,
        } => {
            if print {
                print!("{}", cli::preset_source(&name)?);
                return Ok(());
            }
            let mut c = cli::preset(&name)?;
            if let Some(s) = seed {
                c.optimizer.seed = s;
            }
            if let Some(k) = iterations {
                c.optimizer.iterations = k;
            }
            let dir = out_dir(&c, out);
            report(&cli::run(&c, &dir)?, &dir);
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            iterations,
        } => {
            let mut c = if Path::new(&config).exists() {
                cli::load_config(Path::new(&config))?
            } else {
                cli::preset(&config)?
            };
            if let Some(k) = iterations {
                c.optimizer.iterations = k;
            }
            let (param, values) = match (param, &c.sweep) {
                (Some(p), _) if !values.is_empty() => (p, values),
                (Some(p), Some(s)) if s.param == p => (p, s.values.clone()),
                (None, Some(s)) => (
                    s.param,
                    if values.is_empty() {
                        s.values.clone()
                    } else {
                        values
                    },
                ),
                _ => {
                    return Err(robust_gates::Error::Validation(vec![
                        "sweep needs --param and --values, or a [sweep] block in the config".into(),
                    ]))
                }
            };
            let dir = out_dir(&c, out);
            let points = cli::sweep(&c, param, &values, Some(&dir))?;
            for p in &points {
                println!(
                    "{param} = {}: fidelity {:.6} ({} iterations)",
                    p.value,
                    p.fidelity(),
                    p.iterations
                );
            }
            println!("wrote {}", dir.join("sweep.csv").display());
        }
        Command::ListPresets => {
            let presets = cli::list_presets();
            let width = presets.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in presets {
                println!("{:width$}  {}", p.name, p.description);
            }
        }
    }
    Ok(())
}

fn out_dir(config: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| config.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| Path::new("out").join(&config.name))
}

fn report(outcome: &RunOutcome, dir: &Path) {
    let s = &outcome.summary;
    println!(
        "{}: fidelity {:.12} (infidelity {:.3e}) after {} iterations, {:?}, {:.2?}",
        s.name,
        s.final_fidelity,
        s.final_infidelity,
        s.iterations,
        s.termination,
        outcome.training.wall_time
    );
    if let Some(t) = &s.test {
        println!(
            "  test: {} samples, mean {:.6}, min {:.6}, max {:.6}, std {:.2e}",
            t.count, t.mean, t.min, t.max, t.std_dev
        );
    }
    println!("  artifacts in {}", dir.display());
}
