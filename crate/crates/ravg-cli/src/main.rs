//! `ravg`: stream CSV data into running-average snapshots, extract sparse
//! linear models from snapshots, generate synthetic benchmark data, and run
//! the packaged experiments.

mod cmds;
mod csvio;
mod lock;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ravg", version, about = "streaming sparse regression on running averages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream CSV observations into a snapshot of running averages
    Accumulate(cmds::AccumulateArgs),
    /// Extract a sparse model from a snapshot
    Extract(cmds::ExtractArgs),
    /// Generate synthetic benchmark data as CSV
    Simulate(cmds::SimulateArgs),
    /// Run a packaged experiment and emit result CSVs
    Experiment(cmds::ExperimentArgs),
    /// Evaluate the support-recovery signal-strength bounds
    Bounds(cmds::BoundsArgs),
    /// Print the header and summary statistics of a snapshot
    Inspect(cmds::InspectArgs),
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RAVG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Accumulate(args) => cmds::accumulate(args),
        Command::Extract(args) => cmds::extract(args),
        Command::Simulate(args) => cmds::simulate(args),
        Command::Experiment(args) => cmds::experiment(args),
        Command::Bounds(args) => cmds::bounds(args),
        Command::Inspect(args) => cmds::inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
