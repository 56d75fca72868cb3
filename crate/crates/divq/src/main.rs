//! `divq` — exterior Landau–de Gennes problem with a divergence penalty
//! around a spherical colloid: analytic verification, finite-element solve,
//! boundary-representation evaluation, and post-processing.

use clap::{Parser, Subcommand, ValueEnum};
use divq::cli::{self, RepresentMode};
use divq::config::RunConfig;
use divq::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "divq",
    about = "Q-tensor fields around a spherical colloid with a divergence-penalized elastic energy",
    version
)]
struct Args {
    /// Configuration file (key = value with [section] headers); defaults
    /// apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Analytic conormal data (requires k = 0).
    Analytic,
    /// Conormal data extracted from a prior solve checkpoint.
    Fem,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analytic audit suite (JSON-lines report on stdout).
    Verify {
        /// Test hook: rescale the kernel so the audit must fail.
        #[arg(long, hide = true)]
        inject_error: bool,
    },
    /// Generate/load the configured mesh, write mesh.vtk and a summary.
    Mesh,
    /// Solve the exterior problem; writes checkpoint, VTK, and ring report.
    Solve,
    /// Evaluate the boundary representation formula at points from a CSV.
    Represent {
        /// CSV file of evaluation points (x,y,z per row).
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Analytic)]
        mode: Mode,
    },
    /// Post-process a prior solve: ring report, field maps, decay profiles.
    Analyze,
}

fn load_config(path: &Option<PathBuf>) -> divq::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(args: &Args) -> divq::Result<bool> {
    let mut stdout = std::io::stdout().lock();
    match &args.command {
        Command::Verify { inject_error } => {
            let scale = if *inject_error { 1.001 } else { 1.0 };
            cli::cmd_verify(&mut stdout, scale)
        }
        Command::Mesh => {
            cli::cmd_mesh(&load_config(&args.config)?, &mut stdout)?;
            Ok(true)
        }
        Command::Solve => {
            cli::cmd_solve(&load_config(&args.config)?, &mut stdout)?;
            Ok(true)
        }
        Command::Represent { points, mode } => {
            let mode = match mode {
                Mode::Analytic => RepresentMode::Analytic,
                Mode::Fem => RepresentMode::Fem,
            };
            cli::cmd_represent(&load_config(&args.config)?, points, mode, &mut stdout)?;
            Ok(true)
        }
        Command::Analyze => {
            cli::cmd_analyze(&load_config(&args.config)?, &mut stdout)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed: see report lines above");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                // Usage / configuration / file problems.
                Error::Io(_)
                | Error::Config(_)
                | Error::MeshFormat(_)
                | Error::InvalidArgument(_) => 2,
                // Computational failures.
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
