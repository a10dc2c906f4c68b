//! `amcsim`: crossbar simulation, sweeps, bias compensation and runtime
//! benchmarks from the command line.
//!
//! Exit codes: 0 success, 2 malformed input, 3 singular circuit, 1 other.

mod commands;
mod config;
mod io;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Command, Settings};
use io::InputError;

/// Worker threads for sweeps; defaults to the number of cores.
const THREADS_ENV: &str = "AMCSIM_THREADS";

#[derive(Parser)]
#[command(name = "amcsim", version, about = "Analog matrix-computing crossbar simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve one circuit; writes solution.txt and record.csv|json.
    Simulate(Settings),
    /// Sweep circuits x sizes x resistances x trials; writes sweep.csv|json.
    Sweep(Settings),
    /// Search the optimal bias ratio; writes summary.csv|json and curve.csv|json.
    Compensate(Settings),
    /// Time assembly, factorization and solve over sizes; writes bench.csv|json and bench_fit.csv|json.
    Bench(Settings),
    /// Solve the full nodal-analysis netlist; writes oracle.txt and solution.txt.
    Oracle(Settings),
}

fn run(cli: Cli) -> Result<()> {
    let (cmd, flags) = match cli.command {
        Sub::Simulate(s) => (Command::Simulate, s),
        Sub::Sweep(s) => (Command::Sweep, s),
        Sub::Compensate(s) => (Command::Compensate, s),
        Sub::Bench(s) => (Command::Bench, s),
        Sub::Oracle(s) => (Command::Oracle, s),
    };
    let file = match &flags.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let cfg = flags.over(file).resolve(cmd)?;
    log::debug!("{cfg:?}");
    match cmd {
        Command::Simulate => commands::simulate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Compensate => commands::compensate(&cfg),
        Command::Bench => commands::bench(&cfg),
        Command::Oracle => commands::oracle(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use amcsim::Error as E;
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::Dimension { .. }
            | E::Invalid(_)
            | E::ZeroConductance { .. }
            | E::OutOfRange { .. }
            | E::UnknownPreset(_)
            | E::Generation(_),
        ) => 2,
        Some(E::Singular { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(t) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("{THREADS_ENV}={t} ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
