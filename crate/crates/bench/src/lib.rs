#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Benchmark and experiment driver for the `gslap` solvers.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod range;
pub mod reference;

use cli::{Cli, Command};
use config::Settings;

/// Execute one parsed command line.
pub fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Coeffs(args) => commands::coeffs(&Settings::resolve(&args)?),
        Command::Scan(args) => commands::scan(&Settings::resolve(&args)?),
        Command::Errors(args) => commands::errors(&Settings::resolve(&args)?),
        Command::Price(args) => {
            let settings = Settings::resolve(&args.common)?;
            commands::price(
                &settings,
                args.spot.as_deref(),
                args.common.strike.as_deref(),
                args.trace.as_deref(),
            )
        }
        Command::Steps(args) => {
            let settings = Settings::resolve(&args.common)?;
            commands::steps(
                &settings,
                args.delta_t.unwrap_or(0.1),
                args.n.unwrap_or(10),
                args.spot.unwrap_or(60.0),
                args.trace.as_deref(),
            )
        }
    }
}
