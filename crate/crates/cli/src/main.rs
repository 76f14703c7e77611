mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// Simulator and analysis toolkit for a trapped-ion / frequency-qubit
/// photon correlation experiment.
#[derive(Parser, Debug)]
#[command(name = "ionsim", version, about)]
struct Cli {
    /// Parameter file overriding the built-in defaults key-by-key
    /// (falls back to $IONSIM_CONFIG when unset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every stochastic subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of shots for simulation subcommands.
    #[arg(long, global = true)]
    shots: Option<u64>,

    /// Worker threads for the shot loop (never changes output bytes).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output directory for files and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Record export format.
    #[arg(long, global = true, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,

    /// Keep true branch labels on records for error attribution.
    #[arg(long, global = true)]
    diagnostics: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the excitation pulse and export the trajectory as CSV.
    Lindblad {
        /// Trajectory sample count.
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    /// Print the resolved pulse/measurement timeline.
    Sequence,
    /// Print mirror capture fractions for the configured geometry.
    Collection,
    /// Print the spectrometer optics report.
    Spectrometer,
    /// Solve readout rates against the target fidelities and report them.
    ReadoutCalibrate,
    /// Run the shot-level experiment and export records plus a summary.
    Simulate,
    /// Correlation analysis of conditioned clicks (report + SVG chart).
    Analyze {
        /// Number of conditioned clicks to analyze.
        #[arg(long, default_value_t = 2006)]
        clicks: u64,
        /// Analyze an existing records CSV instead of sampling.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Efficiency budget, error attribution, and the upgrade projection.
    Budget,
    /// Run the full chain against every published value and print a
    /// pass/fail table.
    ReproducePaper,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("IONSIM_CONFIG").map(PathBuf::from));
    let config = match Config::load(config_path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e:#}");
            return ExitCode::from(1);
        }
    };
    let ctx = commands::Context {
        config,
        seed: cli.seed,
        shots: cli.shots,
        workers: cli.workers.max(1),
        out_dir: cli.out.clone(),
        format: cli.format.clone(),
        diagnostics: cli.diagnostics,
    };
    let result = match &cli.command {
        Command::Lindblad { samples } => commands::lindblad(&ctx, *samples),
        Command::Sequence => commands::sequence(&ctx),
        Command::Collection => commands::collection(&ctx),
        Command::Spectrometer => commands::spectrometer(&ctx),
        Command::ReadoutCalibrate => commands::readout_calibrate(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Analyze { clicks, records } => {
            commands::analyze(&ctx, *clicks, records.as_deref())
        }
        Command::Budget => commands::budget(&ctx),
        Command::ReproducePaper => commands::reproduce_paper(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
