//! `opsens` command-line front end.
//!
//! Exit codes: 0 on success, 2 on a configuration error (the message names
//! the offending field or flag), 3 when a sensitivity is undefined because
//! the herald probability vanishes, 1 otherwise.

mod analyze;
mod compare;
mod fidelity;
mod load;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use opsens::{catalog, circuit_file, Error};

#[derive(Parser)]
#[command(name = "opsens", version, about = "Parameter sensitivity of linear-optical circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-component sensitivities and the sensitivity matrix.
    Analyze(analyze::Args),
    /// Compare two implementations by Tr(R·S).
    Compare(compare::Args),
    /// Fidelity sweep of one component as CSV.
    Fidelity(fidelity::Args),
    /// List or export the built-in circuits.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    /// Print an entry in the circuit file format.
    Export {
        name: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(field: impl AsRef<str>, message: impl AsRef<str>) -> Self {
        Failure {
            code: 2,
            message: format!("configuration error in `{}`: {}", field.as_ref(), message.as_ref()),
        }
    }

    /// Any error raised while reading configuration is a configuration error.
    pub fn config_error(e: Error) -> Self {
        match e {
            Error::Config { field, message } => Failure::config(field, message),
            other => Failure::config("circuit", other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { field, message } => Failure::config(field, message),
            Error::LabelMismatch(m) => Failure::config("labels", m),
            Error::VanishingProbability(_) => Failure {
                code: 3,
                message: e.to_string(),
            },
            other => Failure {
                code: 1,
                message: other.to_string(),
            },
        }
    }
}

/// Writes `text` to `path`, or stdout when absent.
pub fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure {
        code: 1,
        message: format!("write failed: {e}"),
    };
    match path {
        Some(p) => std::fs::write(p, text).map_err(io),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Compare(args) => compare::run(args),
        Command::Fidelity(args) => fidelity::run(args),
        Command::Catalog { action } => match action {
            CatalogAction::List => {
                let mut out = String::new();
                for name in catalog::NAMES {
                    out.push_str(name);
                    out.push('\n');
                }
                emit(&out, None)
            }
            CatalogAction::Export { name, output } => {
                let entry = catalog::get(&name).map_err(Failure::config_error)?;
                let text = circuit_file::to_toml(&entry.circuit)?;
                emit(&text, output.as_ref())
            }
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("opsens: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
