//! Command-line front end for `cmient-core`.
//!
//! Exit codes: 0 success, 1 a check found a violation, 2 malformed input
//! or bad flags, 3 an input breaks an invariant or post-selection is
//! infeasible, 4 a budget or configuration error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use cmient_core::Error as CoreError;
use thiserror::Error;

pub mod commands;
pub mod input;
pub mod output;

/// Overrides the directory that relative `--output` paths resolve against.
pub const OUTPUT_DIR_ENV: &str = "CMIENT_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Invariant(_) | CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidBudget(_) | CoreError::CommunicationNotAllowed => {
                CliError::Config(msg)
            }
            CoreError::ZeroProbabilityEvent
            | CoreError::ZeroProbabilityPostSelection { .. }
            | CoreError::PostSelectionCollapse => CliError::Infeasible(msg),
            CoreError::UnknownAxis(_)
            | CoreError::UnknownSubsystem(_)
            | CoreError::OverlappingAxes(_) => CliError::Usage(msg),
            _ => CliError::Invariant(msg),
        }
    }
}

/// Where a report goes: a relative `--output` path is taken relative to
/// `$CMIENT_OUTPUT_DIR` when that is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_report(cli: &commands::Cli, body: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.output {
        Some(p) => {
            let path = resolve_output(p);
            if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| {
                    CliError::Config(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            std::fs::write(&path, body)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write report: {e}"))),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = commands::execute(&cli, stdin).and_then(|o| {
        write_report(&cli, &o.body, stdout)?;
        Ok(o)
    });
    match outcome {
        Ok(o) if o.violation => EXIT_VIOLATION,
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
