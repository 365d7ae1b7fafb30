use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctlab::commands::{cmd_flood, cmd_histogram, cmd_sweep, cmd_tempsweep};
use ctlab::{CliError, RunOptions};

#[derive(Parser)]
#[command(name = "ctlab", version, about = "Concurrent-transmission laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON spec file
    #[arg(long)]
    spec: PathBuf,
    /// Output file (CSV)
    #[arg(long)]
    out: PathBuf,
    /// Override the seed in the spec file
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Print per-point completion to stderr
    #[arg(long)]
    progress: bool,
}

#[derive(Subcommand)]
enum Command {
    /// PER/PRR/PLR sweep over a grid of channel conditions
    Sweep(Common),
    /// Bit-error histogram and beating-frequency estimate
    Histogram(Common),
    /// Heat one transmitter across a temperature range
    Tempsweep(Common),
    /// Flooding protocols under jamming
    Flood(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, c): (fn(_, _, _) -> _, Common) = match cli.command {
        Command::Sweep(c) => (cmd_sweep as fn(&_, &_, &_) -> _, c),
        Command::Histogram(c) => (cmd_histogram, c),
        Command::Tempsweep(c) => (cmd_tempsweep, c),
        Command::Flood(c) => (cmd_flood, c),
    };
    if let Some(n) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Internal(e.to_string()));
        }
    }
    let opts = RunOptions { seed: c.seed, progress: c.progress };
    match run(&c.spec, &c.out, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("ctlab: {e}");
    ExitCode::from(e.exit_code() as u8)
}
