//! `mirrorchain` — experiment runner for the mirror-transport toolkit.
//!
//! Subcommands map one-to-one onto the library's workhorse routines:
//!
//! * `mirror` — dense chain protocol run with a fidelity report;
//! * `track` — symbolic generator trajectory through protocol rounds;
//! * `cv` — Gaussian mirror map applied to a continuous-variable state;
//! * `cqed` — two-resonator device integration, optionally comparing the
//!   full model against its reduced descriptions;
//! * `grape` — pulse synthesis for the squared-quadrature gate;
//! * `verify-all` — the complete cross-module check suite.
//!
//! Every command resolves its options as **flag > config file > default**,
//! writes artifacts (JSON/CSV) into `--out-dir`, and embeds the resolved
//! configuration in its run record.  Artifacts contain no timestamps and
//! all floats are rendered canonically, so identical invocations produce
//! byte-identical files.
//!
//! Exit codes: 0 success; 1 `verify-all` ran but at least one check
//! failed; 2 configuration or usage error; 3 module error (a toolkit
//! routine rejected the run or an artifact could not be written).

mod artifacts;
mod cmd;
mod config;
mod error;

use std::path::Path;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mirrorchain", version, about = "Experiment runner for the mirror-transport toolkit")]
struct Cli {
    /// Sectioned `key = value` config file supplying per-subcommand
    /// defaults (command-line flags win).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Directory receiving the run's artifacts (default: current
    /// directory; also settable per section as `out_dir`).
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// Worker-thread cap for parallel maps (overrides the MIRRORCHAIN_JOBS
    /// environment variable; default: one worker per CPU).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the mirror protocol on a dense qudit chain state.
    Mirror(cmd::mirror::MirrorArgs),
    /// Track a generator word through protocol rounds symbolically.
    Track(cmd::track::TrackArgs),
    /// Apply the continuous-variable mirror map to a Gaussian state.
    Cv(cmd::cv::CvArgs),
    /// Integrate the two-resonator device models.
    Cqed(cmd::cqed::CqedArgs),
    /// Synthesize the squared-quadrature gate pulse.
    Grape(cmd::grape::GrapeArgs),
    /// Run the complete cross-module check suite.
    #[command(name = "verify-all")]
    VerifyAll(cmd::verify::VerifyArgs),
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_jobs(cli.jobs)?;
    let config = match &cli.config {
        Some(path) => RunConfig::load(Path::new(path))?,
        None => RunConfig::empty(),
    };
    let out = cli.out_dir.clone();
    match &cli.cmd {
        Cmd::Mirror(a) => cmd::mirror::run(a, &config, out),
        Cmd::Track(a) => cmd::track::run(a, &config, out),
        Cmd::Cv(a) => cmd::cv::run(a, &config, out),
        Cmd::Cqed(a) => cmd::cqed::run(a, &config, out),
        Cmd::Grape(a) => cmd::grape::run(a, &config, out),
        Cmd::VerifyAll(a) => cmd::verify::run(a, &config, out),
    }
}

/// Caps the global worker pool: `--jobs` beats `MIRRORCHAIN_JOBS`, and when
/// neither is set the library's default (one worker per CPU) applies.
fn init_jobs(flag: Option<usize>) -> Result<(), CliError> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var("MIRRORCHAIN_JOBS") {
            Ok(raw) => Some(raw.parse::<usize>().map_err(|e| {
                CliError::Config(format!("MIRRORCHAIN_JOBS={raw}: {e}"))
            })?),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(CliError::Config(format!("MIRRORCHAIN_JOBS: {e}"))),
        },
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Module(format!("worker pool: {e}")))?;
    }
    Ok(())
}
