use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use saep_cli::commands::{emit_comparison, run_experiment, sweep_alpha, RunOptions};

/// Ensemble architecture search with pruning: run experiments, sweep the
/// entropy criterion's α, and tabulate reports.
#[derive(Parser)]
#[command(name = "saep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config; writes a JSON report and a
    /// CSV iteration history.
    Run {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (beats the SAEP_OUT_DIR env var and the
        /// config's output.dir).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 2 or more trains the two candidate branches
        /// concurrently (identical results, less wall clock).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the pie criterion once per α value and write a sweep CSV.
    SweepAlpha {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated α values; defaults to 0.1..0.9 in 0.1 steps.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Tabulate one or more run reports into a comparison CSV.
    Compare {
        /// Report JSON files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output CSV path.
        #[arg(long, default_value = "comparison.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out_dir,
            seed,
            threads,
        } => run_experiment(
            &config,
            &RunOptions {
                out_dir,
                seed,
                threads,
            },
        )
        .map(|_| ()),
        Command::SweepAlpha {
            config,
            alphas,
            out_dir,
            seed,
            threads,
        } => {
            let alphas =
                alphas.unwrap_or_else(|| (1..=9).map(|i| i as f64 / 10.0).collect());
            sweep_alpha(
                &config,
                &alphas,
                &RunOptions {
                    out_dir,
                    seed,
                    threads,
                },
            )
            .map(|_| ())
        }
        Command::Compare { reports, out } => emit_comparison(&reports, &out).map(|table| {
            print!("{table}");
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
