//! Command-line front end for `ldpgamma-core`: norm and witness solvers,
//! hard-family bundles, privacy audits, protocol simulations and sweeps.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod io;
pub mod sweep;

pub use ldpgamma_core as core;
pub use ldpgamma_core::zoo;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use crate::commands::Verdict;
use crate::config::CommonArgs;

/// Exit code for any error, including usage errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ldpgamma", version, about = "Factorization norms and non-interactive LDP learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate γ₂ norm of a class matrix or a matrix file, with its factorization.
    Gamma2(CommonArgs),
    /// The realizable norm η of a class.
    Eta(CommonArgs),
    /// Dual witness for γ₂(D, α) (agnostic) or η(C, α) (realizable).
    Witness(CommonArgs),
    /// Hard distribution family built from a witness, with every property checked.
    Hardfamily(CommonArgs),
    /// One protocol run: sample, randomize, learn or refute.
    Simulate(CommonArgs),
    /// Repeated trials over a grid of alpha, epsilon and n, written as CSV.
    Sweep(CommonArgs),
    /// Exact privacy audit of the coord-rr randomizer.
    Audit(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Gamma2(a)
            | Command::Eta(a)
            | Command::Witness(a)
            | Command::Hardfamily(a)
            | Command::Simulate(a)
            | Command::Sweep(a)
            | Command::Audit(a) => a,
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(Verdict::Positive) => 0,
        Ok(Verdict::Negative) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(command: &Command) -> anyhow::Result<Verdict> {
    let cfg = command.args().resolve()?;
    match command {
        Command::Gamma2(_) => commands::gamma2(&cfg),
        Command::Eta(_) => commands::eta_cmd(&cfg),
        Command::Witness(_) => commands::witness(&cfg),
        Command::Hardfamily(_) => commands::hardfamily(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Sweep(_) => commands::sweep_cmd(&cfg),
        Command::Audit(_) => commands::audit(&cfg),
    }
}
