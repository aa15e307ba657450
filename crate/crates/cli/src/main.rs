//! `invopt` — design, verify, simulate, and sweep inverse-optimal feedback
//! controllers described by scenario files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use invopt_cli::commands::{self, Command as Cmd};
use invopt_cli::scenario::Overrides;

#[derive(Parser)]
#[command(
    name = "invopt",
    version,
    about = "Inverse-optimal controller design from control Lyapunov functions",
    after_help = "Exit codes: 0 success / verification passed, 1 verification failed, \
                  2 configuration error, 3 runtime error.\n\
                  INVOPT_THREADS caps sweep parallelism (default: hardware threads)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file
    scenario: PathBuf,
    /// Output directory (overrides the scenario's output section)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verification seed (overrides the scenario)
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step override
    #[arg(long)]
    h: Option<f64>,
    /// Horizon override
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// For linear scenarios: also scan the printed (unhalved drift) cost
    /// matrix and record how far it misses the stationarity identity
    #[arg(long)]
    paper_literal: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the designed controller, costs, and Q matrices as JSON
    Design(CommonArgs),
    /// Run the verification suite; exit 0 iff every check passes
    Verify(CommonArgs),
    /// Integrate the closed loop and write the trajectory CSV
    Simulate(CommonArgs),
    /// Simulate the scenario once per penalty candidate and summarize
    Sweep(CommonArgs),
}

fn main() {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Design(args) => (Cmd::Design, args),
        Command::Verify(args) => {
            let paper_literal = args.paper_literal;
            (Cmd::Verify { paper_literal }, args)
        }
        Command::Simulate(args) => (Cmd::Simulate, args),
        Command::Sweep(args) => (Cmd::Sweep, args),
    };
    let overrides = Overrides {
        out_dir: args.out.clone(),
        seed: args.seed,
        step: args.h,
        horizon: args.horizon,
    };
    std::process::exit(commands::run(kind, &args.scenario, overrides));
}
