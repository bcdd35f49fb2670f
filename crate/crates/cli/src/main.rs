//! `blp`: sample the BLP gradient field, check residuals, and estimate
//! box-counting dimensions from the command line.

mod calibrate;
mod config;
mod dimension;
mod exit;
mod output;
mod sample;
mod table1;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "BLP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "blp", version, about = "Fractal surfaces from exact BLP solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample U on a window or zoom series and write grid files
    Sample(sample::SampleCmd),
    /// Box-counting dimension of a sampled field, grid file or calibration set
    Dimension(dimension::DimensionCmd),
    /// Finite-difference residuals of the governing equations
    Verify(verify::VerifyCmd),
    /// Dimension estimates for all three families across the zoom series
    Table1(table1::Table1Cmd),
    /// Dimension estimates of sets with known dimension
    Calibrate(calibrate::CalibrateCmd),
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| exit::usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Sample(c) => sample::run(c),
        Command::Dimension(c) => dimension::run(c),
        Command::Verify(c) => verify::run(c),
        Command::Table1(c) => table1::run(c),
        Command::Calibrate(c) => calibrate::run(c),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_of(&e))
        }
    }
}
