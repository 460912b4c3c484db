use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Exit status for bad arguments, unreadable inputs and failed validation.
const EXIT_USAGE: u8 = 1;
/// Exit status for failures while running (timeouts, write errors, engine faults).
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "warmslice", version, about = "Serverless scaling-policy simulator and resize bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct OutDir {
    /// Output directory
    #[arg(long, env = "WARMSLICE_OUT", default_value = "warmslice-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trace and summary.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run all four policies on all six catalog workloads and write a report.
    Grid {
        #[arg(long, default_value_t = warmslice::scenario::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Measure resize plans against the mock orchestrator.
    ResizeBench(commands::ResizeBenchArgs),
    /// Normalize policy summaries by their workload's baseline.
    Report {
        /// Baseline summary JSON, one per workload
        #[arg(long, num_args = 1.., required = true)]
        baseline: Vec<PathBuf>,
        /// Policy summary JSON files
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Also write report.json and report.txt here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit tidy x,y,group CSV for one figure.
    PlotData {
        /// fig2 | fig3 | fig4 | fig5a | fig5b | fig6 | fig7
        #[arg(long)]
        figure: String,
        /// Measurement CSVs (fig2 to fig5b) or trace CSVs (fig6, fig7)
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error the user can fix by changing arguments or inputs.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<warmslice::Error>() {
        Some(
            warmslice::Error::Io { .. }
            | warmslice::Error::Protocol(_)
            | warmslice::Error::WatchTimeout { .. }
            | warmslice::Error::NotFinished(_),
        ) => EXIT_RUNTIME,
        Some(_) => EXIT_USAGE,
        None => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, seed, out } => commands::simulate(&scenario, seed, &out.out),
        Command::Grid { seed, out } => commands::grid(seed, &out.out),
        Command::ResizeBench(args) => commands::resize_bench(&args),
        Command::Report {
            baseline,
            inputs,
            out,
        } => commands::report(&baseline, &inputs, out.as_deref()),
        Command::PlotData {
            figure,
            inputs,
            out,
        } => commands::plot_data(&figure, &inputs, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
