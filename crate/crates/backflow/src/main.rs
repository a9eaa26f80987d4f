use std::path::PathBuf;
use std::process::ExitCode;

use backflow::config::Experiment;
use backflow::experiments::{resolve, run, Overrides};
use clap::{Args, Parser, Subcommand};

/// Non-Markovian quantum jumps and replica Potts sweeps.
#[derive(Parser)]
#[command(name = "backflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize a rate profile and tabulate the bond energies per layer.
    RateReport(Common),
    /// Compare the jump ensemble with the master equation on a small qubit chain.
    TrajectoryValidate(Common),
    /// Monte Carlo sweep over (p, l_A, seed) with slope fits.
    McSweep(Common),
    /// Refit the chain files of an earlier sweep.
    Analyze(Common),
    /// Render a CSV matrix as an SVG heatmap.
    Heatmap(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides BACKFLOW_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, capped by BACKFLOW_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (experiment, args) = match cli.command {
        Command::RateReport(a) => (Experiment::RateReport, a),
        Command::TrajectoryValidate(a) => (Experiment::TrajectoryValidate, a),
        Command::McSweep(a) => (Experiment::McSweep, a),
        Command::Analyze(a) => (Experiment::Analyze, a),
        Command::Heatmap(a) => (Experiment::Heatmap, a),
    };
    let ov = Overrides { config: args.config, out: args.out, seed: args.seed, threads: args.threads };
    match resolve(experiment, &ov).and_then(|inv| run(&inv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("backflow {}: {e}", experiment.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
