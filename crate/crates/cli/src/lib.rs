//! Command-line driver for the SPH consistency lab: configuration, study
//! runs, slope tables and log-log figures.

pub mod commands;
pub mod config;
pub mod plot;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use commands::execute;
pub use config::{parse_config, CliConfig, Command, DistributionKind, Invocation, LadderSpec};
pub use plot::{emit_loglog_plot, render_loglog_svg, PlotError, PlotLabels, Reference, Series};
pub use table::{emit_slope_table, SlopeTable};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag, value or config file; nothing was run.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    /// Help or version text requested.
    #[error("{0}")]
    Info(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Info(_) => EXIT_OK,
        }
    }

    pub(crate) fn from_clap(err: clap::Error) -> Self {
        use clap::error::ErrorKind;
        let text = err.render().to_string();
        match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                CliError::Info(text)
            }
            _ => CliError::Usage(text.trim_start_matches("error: ").trim_end().to_string()),
        }
    }
}

impl From<sphlab_core::SphError> for CliError {
    fn from(err: sphlab_core::SphError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`; readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with<I, T>(argv: I, env_out: Option<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = parse_config(argv, env_out).and_then(|inv| execute(&inv, stdout, stderr));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Info(text)) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
