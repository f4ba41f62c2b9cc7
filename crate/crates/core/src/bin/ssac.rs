use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssac::experiment::{check_dataset, emit_fixture, run_grid, write_outputs, ExperimentConfig};
use ssac::Result;

/// Weak-oracle semi-supervised active clustering simulator.
#[derive(Debug, Parser)]
#[command(name = "ssac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment grid and write runs.csv and summary.csv.
    Run {
        /// JSON (.json) or TOML config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Repetitions per cell.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the margin and coverage conditions of the configured dataset.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Coverage slack; defaults to (gamma - 1) / 2.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Write a small labeled dataset in the embedding file format.
    Fixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            reps,
            parallel,
            seed,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(reps) = reps {
                cfg.repetitions = reps;
            }
            if let Some(parallel) = parallel {
                cfg.parallel = parallel;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let outcome = run_grid(&cfg)?;
            let (runs, summary) = write_outputs(&outcome, &cfg.out)?;
            println!(
                "{:<9} {:<8} {:>6} {:>6} {:>9} {:>8} {:>9} {:>10}",
                "variant", "oracle", "c_dist", "eta", "accuracy", "std", "failures", "queries"
            );
            for s in &outcome.summary {
                println!(
                    "{:<9} {:<8} {:>6.2} {:>6.1} {:>9.4} {:>8.4} {:>9} {:>10.1}",
                    s.variant.name(),
                    s.oracle.name(),
                    s.c_dist,
                    s.eta,
                    s.mean_accuracy,
                    s.std_accuracy,
                    s.failure_count,
                    s.mean_queries
                );
            }
            println!("wrote {} and {}", runs.display(), summary.display());
        }
        Command::Check {
            config,
            seed,
            epsilon,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if epsilon.is_some() {
                cfg.epsilon = epsilon;
            }
            let check = check_dataset(&cfg)?;
            println!("points: {}  clusters: {}", check.n, check.k);
            println!("realized gamma: {}", check.realized_gamma);
            println!("epsilon: {}", check.epsilon);
            for v in &check.verdicts {
                println!(
                    "{} c_dist={} (nu={:.4}, rho={:.4}): c={:.4} -> {}",
                    v.oracle.name(),
                    v.c_dist,
                    v.nu,
                    v.rho,
                    v.report.constant,
                    if v.report.satisfied {
                        "satisfied"
                    } else {
                        "not satisfied"
                    }
                );
                for (i, (ratio, ok)) in v
                    .report
                    .min_ratios
                    .iter()
                    .zip(&v.report.covered)
                    .enumerate()
                {
                    println!(
                        "  cluster {i}: min d/r = {ratio:.4} {}",
                        if *ok { "ok" } else { "uncovered" }
                    );
                }
            }
        }
        Command::Fixture { seed, out } => {
            let data = emit_fixture(seed, &out)?;
            println!("wrote {} points to {}", data.dataset.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
