//! Command-line front end for the `twinbeam` toolkit: point evaluation,
//! threshold queries, grid scans, seeded Monte Carlo experiments, and
//! oracle cross-checks, emitted as CSV or JSON with stable formatting.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
//! 3 I/O error.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod scan;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use error::CliResult;
use scan::{OutFormat, RangeSpec};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Nonclassicality analysis of thermally seeded parametric downconversion",
    after_help = "Config files (--config) supply values for omitted flags; \
                  precedence is flags > config > defaults."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PointArgs {
    /// Mean thermal photons of seed 1
    #[arg(long)]
    mu1: Option<f64>,
    /// Mean thermal photons of seed 2
    #[arg(long)]
    mu2: Option<f64>,
    /// Mean photons from the spontaneous process
    #[arg(long)]
    muk: Option<f64>,
    /// Config file (key=value lines or a JSON object)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the three nonclassicality parameters at one operating point
    Gamma {
        #[command(flatten)]
        point: PointArgs,
        /// Overall loss factor per channel in [0, 1]
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Critical muk values where each parameter changes sign
    Thresholds {
        /// Mean thermal photons of seed 1
        #[arg(long)]
        mu1: Option<f64>,
        /// Mean thermal photons of seed 2
        #[arg(long)]
        mu2: Option<f64>,
        /// Config file (key=value lines or a JSON object)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a grid of operating points and emit CSV or JSON
    Scan {
        /// Range for mu1 as start:stop:step (or a single value)
        #[arg(long, value_parser = clap::builder::ValueParser::new(parse_range))]
        mu1: Option<RangeSpec>,
        /// Range for mu2 as start:stop:step (or a single value)
        #[arg(long, value_parser = clap::builder::ValueParser::new(parse_range))]
        mu2: Option<RangeSpec>,
        /// Range for muk as start:stop:step (or a single value)
        #[arg(long, value_parser = clap::builder::ValueParser::new(parse_range))]
        muk: Option<RangeSpec>,
        /// Overall loss factor per channel in [0, 1]
        #[arg(long)]
        tau: Option<f64>,
        /// Pair count (homogeneous margins are pair-count invariant)
        #[arg(long)]
        modes: Option<u64>,
        /// Output format: csv or json
        #[arg(long, value_parser = clap::builder::ValueParser::new(parse_format))]
        format: Option<OutFormat>,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Permit grids above the 10^7-point cap
        #[arg(long)]
        allow_large: bool,
        /// Config file (key=value lines or a JSON object)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample photon-counting events, estimate the parameters, and compare
    /// with the analytic targets
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        /// Overall loss factor per channel in [0, 1]
        #[arg(long)]
        tau: Option<f64>,
        /// Number of events to draw
        #[arg(long)]
        trials: Option<u64>,
        /// RNG seed (required; there is no default on purpose)
        #[arg(long)]
        seed: Option<u64>,
        /// Pair count for the multimode witness divisor
        #[arg(long)]
        modes: Option<u64>,
        /// Write raw events (CSV columns k,l) to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the closed forms against the Fock and Gaussian oracles
    Oracle {
        #[command(flatten)]
        point: PointArgs,
        /// Fock-space truncation depth (auto-chosen when omitted)
        #[arg(long)]
        cutoff: Option<u64>,
    },
    /// Multimode witness and sub-shot-noise condition
    Multimode {
        /// Number of downconverted pairs
        #[arg(long)]
        modes: Option<u64>,
        #[command(flatten)]
        point: PointArgs,
        /// Overall loss factor per channel in [0, 1]
        #[arg(long)]
        tau: Option<f64>,
    },
}

fn parse_range(s: &str) -> Result<RangeSpec, String> {
    s.parse::<RangeSpec>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<OutFormat, String> {
    s.parse::<OutFormat>().map_err(|e| e.to_string())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gamma { point, tau } => {
            commands::cmd_gamma(point.mu1, point.mu2, point.muk, tau, point.config.as_deref())
        }
        Command::Thresholds { mu1, mu2, config } => {
            commands::cmd_thresholds(mu1, mu2, config.as_deref())
        }
        Command::Scan { mu1, mu2, muk, tau, modes, format, out, allow_large, config } => {
            commands::cmd_scan(mu1, mu2, muk, tau, modes, format, out, allow_large, config.as_deref())
        }
        Command::Simulate { point, tau, trials, seed, modes, out } => commands::cmd_simulate(
            point.mu1,
            point.mu2,
            point.muk,
            tau,
            trials,
            seed,
            modes,
            out,
            point.config.as_deref(),
        ),
        Command::Oracle { point, cutoff } => {
            commands::cmd_oracle(point.mu1, point.mu2, point.muk, cutoff, point.config.as_deref())
        }
        Command::Multimode { modes, point, tau } => commands::cmd_multimode(
            modes,
            point.mu1,
            point.mu2,
            point.muk,
            tau,
            point.config.as_deref(),
        ),
    }
}

/// Parses arguments, runs the selected command, and exits with the
/// documented code.
pub fn run() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
