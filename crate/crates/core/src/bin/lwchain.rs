use std::path::PathBuf;

use clap::{Parser, Subcommand};
use lwchain::cli;

#[derive(Parser)]
#[command(name = "lwchain", version, about = "Run lightweight-blockchain network simulations")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with one seed and write CSV metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write events.ndjson.
        #[arg(long)]
        events: bool,
    },
    /// Compare the malicious node's reputation under all three modes.
    Figure1 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario, then print it with defaults filled in.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match args.command {
        Command::Run {
            scenario,
            seed,
            out,
            events,
        } => cli::cmd_run(&scenario, seed, &out, events),
        Command::Figure1 { scenario, seeds, out } => cli::cmd_figure1(&scenario, seeds, &out),
        Command::Validate { scenario } => cli::cmd_validate(&scenario),
    };
    std::process::exit(code.code());
}
