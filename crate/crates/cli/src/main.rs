mod args;
mod commands;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use loudclass::ErrorKind;

use args::{Cli, Command};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<loudclass::Error> for CliError {
    fn from(e: loudclass::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => EXIT_USAGE,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Numeric => EXIT_NUMERIC,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let name = cli.command.name();
    let result = match cli.command {
        Command::Replay(a) => manifest::replay(&a),
        command => commands::run(command, cli.config.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("loudclass {name}: {e}");
            ExitCode::from(e.code)
        }
    }
}
