//! Error type shared by every subcommand, carrying the process exit code.
//!
//! The binary distinguishes two failure classes so scripts can react to
//! them separately:
//!
//! * **configuration errors** (exit code 2) — malformed config files,
//!   unknown keys, unparsable or out-of-range flag values.  Nothing was
//!   computed; fixing the invocation fixes the problem.  This matches the
//!   exit code clap itself uses for usage errors.
//! * **module errors** (exit code 3) — the invocation was well formed but a
//!   toolkit routine rejected it (dimension too large, state not
//!   normalized, integrator rejected the grid, …) or an artifact could not
//!   be written.
//!
//! `verify-all` additionally exits with code 1 when every check ran but at
//! least one failed; that path does not go through [`CliError`].

use std::fmt;

use crate::config::ConfigError;

/// A subcommand failure together with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// The invocation could not be understood (exit code 2).
    Config(String),
    /// A toolkit routine or artifact write failed (exit code 3).
    Module(String),
}

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for `verify-all` when at least one check fails.
pub const EXIT_VERIFY_FAILED: i32 = 1;
/// Exit code for configuration and usage errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for module-level failures.
pub const EXIT_MODULE: i32 = 3;

impl CliError {
    /// The process exit code this error maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Module(_) => EXIT_MODULE,
        }
    }

    /// Wraps a toolkit error as a module failure.
    pub fn module(err: impl fmt::Display) -> Self {
        CliError::Module(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Module(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> Self {
        CliError::Config(err.0)
    }
}
