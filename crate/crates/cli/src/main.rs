//! `bdt` command-line front end.

mod args;
mod commands;
mod error;
mod inputs;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command, ConfigFile, Merge};
use crate::error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let mut command = cli.command;
    if let Some(path) = &cli.config {
        command.merge(&ConfigFile::load(path)?)?;
    }
    match &command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Price(a) => commands::price(a),
        Command::Imply(a) => commands::imply(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
