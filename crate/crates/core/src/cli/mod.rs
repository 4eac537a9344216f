//! The `biathlon-bayes` command line.
//!
//! Every subcommand reads files, writes files into `--out` and nothing
//! else: `manifest.json` first (resolved configuration, seeds, input
//! digests, tool version), then its outputs, each through a temporary file
//! and a rename. Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure
//! (including a failed validation check).

mod args;
mod commands;
mod files;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use self::args::{Cli, Command, DrawsFormat, ValidateCommand};
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Numerical(_) | Error::Undefined(_) | Error::InsufficientDraws { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Result of a subcommand that ran to completion.
pub enum Outcome {
    Done,
    /// A check ran and did not pass.
    Failed(String),
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Failed(why)) => {
            eprintln!("check failed: {why}");
            EXIT_NUMERICAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(resolve(&a, &a.common.config)?),
        Command::Explore(a) => commands::explore(resolve(&a, &a.common.config)?),
        Command::Fit(a) => commands::fit(resolve(&a, &a.common.config)?),
        Command::Diagnose(a) => commands::diagnose(resolve(&a, &a.common.config)?),
        Command::Predict(a) => commands::predict(resolve(&a, &a.common.config)?),
        Command::Simulate(a) => commands::simulate(resolve(&a, &a.common.config)?),
        Command::Validate { check } => match check {
            ValidateCommand::Oracle(a) => commands::oracle(resolve(&a, &a.common.config)?),
            ValidateCommand::Gradcheck(a) => commands::gradcheck(resolve(&a, &a.common.config)?),
            ValidateCommand::Sbc(a) => commands::sbc(resolve(&a, &a.common.config)?),
        },
    }
}

/// Flags merged over the JSON config file, if any.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: &Option<PathBuf>) -> Result<T> {
    let file = match config {
        Some(p) => {
            let bytes = files::read_bytes(p)?;
            Some(serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let merged = files::merge_config(file, serde_json::to_value(flags)?);
    serde_json::from_value(merged).map_err(|e| Error::Config(format!("configuration: {e}")))
}

#[derive(Clone, Debug, Serialize)]
struct InputDigest {
    role: &'static str,
    path: String,
    sha256: String,
}

/// `manifest.json` contents; deterministic (no clock, no thread count).
#[derive(Debug, Serialize)]
struct Manifest<C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: C,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<InputDigest>,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

impl<C: Serialize> Manifest<C> {
    fn new(command: &'static str, config: C) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    fn input(&mut self, role: &'static str, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            role,
            path: path.display().to_string(),
            sha256: files::sha256_hex(bytes),
        });
    }

    fn extra(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.extra.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        files::write_json(dir, files::MANIFEST, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["biathlon-bayes", "fit", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_from(["biathlon-bayes", "nonsense"]), EXIT_USAGE);
        assert_eq!(run_from(["biathlon-bayes", "--help"]), EXIT_OK);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::parse(3, "x")), EXIT_DATA);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
    }
}
