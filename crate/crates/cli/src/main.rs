use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod sweep;

#[derive(Parser, Debug)]
#[command(name = "nonsplit", version, about = "2-D TM FDTD with embedded fine blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one or more scenarios and write CSV output.
    Run {
        scenarios: Vec<PathBuf>,
        /// Output directory; one subdirectory per job when sweeping.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Replace the ratio of every block; repeat to sweep.
        #[arg(long = "ratio", value_name = "P:Q")]
        ratios: Vec<String>,
        /// Concurrent jobs (default: NONSPLIT_WORKERS or available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Operator, skew-symmetry and eigenvalue diagnostics.
    CheckSbp {
        scenario: PathBuf,
        /// Random states for the energy-rate check on large systems.
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// Build an interpolation pair and report its residuals.
    GenInterp {
        #[arg(long, value_name = "P:Q")]
        ratio: String,
        /// Coarse interface nodes.
        #[arg(long)]
        nodes: usize,
        /// Coarse spacing along the interface.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long, default_value = "interp")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Reflection coefficient from total and reference line-probe CSVs.
    S11 {
        #[arg(long)]
        total: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        f_max: f64,
        #[arg(long, default_value_t = 0.0)]
        f_min: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Source cutoff, for flagging low-confidence frequencies.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in scenario.
    Preset {
        name: Option<String>,
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenarios,
            out,
            force,
            ratios,
            jobs,
        } => sweep::run(&scenarios, &out, force, &ratios, jobs),
        Command::CheckSbp { scenario, samples } => commands::check_sbp(&scenario, samples),
        Command::GenInterp {
            ratio,
            nodes,
            spacing,
            out,
            force,
        } => commands::gen_interp(&ratio, nodes, spacing, &out, force),
        Command::S11 {
            total,
            reference,
            f_max,
            f_min,
            points,
            cutoff,
            out,
        } => commands::s11(&total, &reference, f_min, f_max, points, cutoff, out.as_deref()),
        Command::Preset {
            name,
            full_scale,
            list,
            out,
        } => commands::preset(name.as_deref(), full_scale, list, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
