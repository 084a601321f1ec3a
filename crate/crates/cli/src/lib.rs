//! Command-line front end for `cdsense`.

pub mod args;
pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod validate;

use args::{Cli, Command};
use error::{CliError, CliResult};

/// Runs one subcommand, writing its output.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Bounds(a) => commands::bounds(a)?.emit(a.common.out.as_deref()),
        Command::Ratio(a) => commands::ratio(a)?.emit(a.common.out.as_deref()),
        Command::Sweep(a) => commands::sweep(a)?.emit(a.common.out.as_deref()),
        Command::Simulate(a) => {
            let out = commands::simulate(a)?;
            for line in &out.summary {
                eprintln!("{line}");
            }
            out.table.emit(a.common.out.as_deref())
        }
        Command::Validate => {
            let checks = validate::run_all();
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed > 0 {
                return Err(CliError::ValidationFailed {
                    failed,
                    total: checks.len(),
                });
            }
            Ok(())
        }
    }
}
