//! `entroflow`: experiments on entropy decay for the Ornstein-Uhlenbeck flow.
//!
//! Exit codes: 0 when every check passes, 1 when a mathematical violation was
//! found, 2 on usage or configuration errors.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::Verdict;
use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "entroflow", version, about = "Entropy decay experiments on Hermite expansions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one initial datum; writes trajectory.csv and summary.json.
    Simulate(Flags),
    /// Seeded sweep of the functional inequalities; writes inequality.json.
    Inequality(Flags),
    /// Fitted and predicted decay rates per seed and p; writes decay.csv.
    Decay(Flags),
    /// Tightness of the improved log-Sobolev inequality along an amplitude ladder; writes sharpness.csv.
    Sharpness(Flags),
    /// Lowest eigenvalues for a general potential; writes spectrum.csv.
    Spectrum(Flags),
    /// Emits a gnuplot script for a CSV report.
    Plot {
        /// Report to plot (trajectory, sharpness, decay or spectrum CSV).
        report: PathBuf,
        /// Directory for the script (default: next to the report).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Moment order for the trajectory envelope (default: from summary.json).
        #[arg(long)]
        n: Option<usize>,
    },
}

fn usage_error(sub: &str, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    let mut cmd = Cli::command();
    cmd.build();
    if let Some(s) = cmd.find_subcommand_mut(sub) {
        eprintln!("\n{}", s.render_usage());
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result) = match &cli.command {
        Command::Plot { report, out, n } => {
            return match plot::plot_file(report, out.as_deref(), *n) {
                Ok(path) => {
                    println!("{}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => usage_error("plot", &e),
            };
        }
        Command::Simulate(f) => ("simulate", RunConfig::load(f).and_then(|c| commands::simulate(&c))),
        Command::Inequality(f) => ("inequality", RunConfig::load(f).and_then(|c| commands::inequality(&c))),
        Command::Decay(f) => ("decay", RunConfig::load(f).and_then(|c| commands::decay(&c))),
        Command::Sharpness(f) => ("sharpness", RunConfig::load(f).and_then(|c| commands::sharpness(&c))),
        Command::Spectrum(f) => ("spectrum", RunConfig::load(f).and_then(|c| commands::spectrum_cmd(&c))),
    };
    match result {
        Ok(Verdict::Clean) => ExitCode::SUCCESS,
        Ok(Verdict::Violation) => {
            eprintln!("{name}: violation found");
            ExitCode::from(1)
        }
        Err(e) => usage_error(name, &e),
    }
}
