//! Command-line front end for the Hamilton-Jacobi verification library.
//!
//! Exit codes: 0 success (or a passing check), 1 failed check, 2 usage or
//! configuration error, 3 numerical failure (diverged Newton, guard
//! violation, singular structures).

mod candidate;
mod commands;
mod config;
mod expr;
mod report;

use clap::{Parser, Subcommand};

use commands::{BracketsArgs, Failure, IntegrateArgs, ListArgs, ScanArgs, VerifyArgs};
use config::FileSettings;

#[derive(Parser)]
#[command(name = "hjt", version, about = "Hamilton-Jacobi field checks for Lagrangian and Hamiltonian systems")]
struct Cli {
    /// Config file with flat key = value lines and [subcommand] sections;
    /// command-line flags override it
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a candidate vector field or one-form against a system
    Verify(VerifyArgs),
    /// Integrate the dynamics and report conserved-quantity drift
    Integrate(IntegrateArgs),
    /// Pairwise Poisson bracket magnitudes of registered first integrals
    Brackets(BracketsArgs),
    /// Sweep a leaf family over level values and check each slice
    Scan(ScanArgs),
    /// List registered systems with their candidates and integrals
    ListSystems(ListArgs),
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let cfg = match &cli.config {
        Some(path) => FileSettings::load(path).map_err(|e| Failure::usage(e.to_string()))?,
        None => FileSettings::empty(),
    };
    let threads = commands::threads_from_env()?;
    match &cli.cmd {
        Cmd::Verify(a) => commands::run_verify(a, &cfg, threads),
        Cmd::Integrate(a) => commands::run_integrate(a, &cfg),
        Cmd::Brackets(a) => commands::run_brackets(a, &cfg, threads),
        Cmd::Scan(a) => commands::run_scan(a, &cfg, threads),
        Cmd::ListSystems(a) => commands::run_list_systems(a, &cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            std::process::exit(f.code);
        }
    }
}
