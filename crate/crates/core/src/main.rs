use std::path::PathBuf;

use clap::Parser;
use delsarte::cli::{self, Command, RunOptions};

/// Delsarte transmutation workbench.
#[derive(Parser)]
#[command(version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG line plots.
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let args = Args::parse();
    let opts = RunOptions { out: args.out, plots: args.plots, seed: args.seed };
    std::process::exit(cli::main_with(args.command, &args.config, &opts));
}
