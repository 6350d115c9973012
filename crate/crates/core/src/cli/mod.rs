//! Command-line front end: argument parsing, `key = value` config files and
//! self-describing CSV/JSON output.

mod args;
mod commands;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

pub use args::{Cli, Command};

use crate::error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure of a CLI run, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or parameter values (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Failure while simulating or writing output (exit 1).
    #[error(transparent)]
    Runtime(Error),
}

impl From<Error> for CliError {
    /// Rejected parameter values and meshes are usage errors; everything
    /// else is a runtime failure.
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::DegenerateDomain(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match run(&argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                print_schema(&argv);
            }
            e.exit_code()
        }
    }
}

fn run(argv: &[OsString]) -> Result<(), CliError> {
    let argv = merge_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return Ok(());
            }
            _ => {
                let text = e.render().to_string();
                let text = text.trim_end().trim_start_matches("error: ");
                return Err(CliError::Usage(text.to_string()));
            }
        },
    };
    commands::execute(&cli)
}

/// Flag schema of the subcommand named in `argv`, or of the whole program.
fn print_schema(argv: &[OsString]) {
    let mut cmd = Cli::command();
    let name = argv
        .iter()
        .skip(1)
        .filter_map(|a| a.to_str())
        .find(|a| cmd.find_subcommand(a).is_some())
        .map(str::to_string);
    let help = match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|c| c.render_help())) {
        Some(h) => h,
        None => cmd.render_help(),
    };
    eprintln!("\n{help}");
}

/// Parses a config file into `(key, value)` pairs, one per non-blank line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", k + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key `{key}`", k + 1)));
        }
        pairs.push((key, value.to_string()));
    }
    Ok(pairs)
}

/// Appends config-file values as flags unless the command line already
/// sets them. Keys that are not flags of the chosen command are rejected
/// by the parser afterwards.
fn merge_config(argv: &[OsString]) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<&str> = argv.iter().filter_map(|a| a.to_str()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        if *a == "--config" {
            strs.get(i + 1).map(|s| s.to_string())
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(argv.to_vec());
    };
    let text = fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config `{path}`: {e}")))?;
    let mut merged = argv.to_vec();
    for (key, value) in parse_config(&text)? {
        let flag = format!("--{key}");
        let given = strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if !given {
            merged.push(flag.into());
            merged.push(value.into());
        }
    }
    Ok(merged)
}

/// Writes `body` after the header line to `out`, or to standard output.
fn emit(out: Option<&Path>, header: &str, body: &[u8]) -> Result<(), CliError> {
    let mut bytes = Vec::with_capacity(header.len() + body.len() + 1);
    bytes.extend_from_slice(header.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(body);
    match out {
        Some(p) => fs::write(p, &bytes).map_err(Error::from)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}
