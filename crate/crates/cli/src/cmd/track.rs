//! `track` — conjugate a single generator word through protocol rounds.

use clap::Args;

use mirrorchain_core::pauli::{CvAlgebra, PauliWord, QuditAlgebra};
use mirrorchain_core::qudit::QuditDim;
use mirrorchain_core::tracker::{
    cv_trajectory_json, mirror_trajectory, qudit_trajectory_json, ChainSpec,
};

use crate::artifacts::Artifacts;
use crate::config::{resolved_json, Resolver, RunConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Chain flavor: qudit or cv (default qudit).
    #[arg(long)]
    mode: Option<String>,
    /// Local dimension for qudit mode (default 2, ignored for cv).
    #[arg(long)]
    d: Option<usize>,
    /// Number of chain sites (default 4).
    #[arg(long)]
    n: Option<usize>,
    /// Site carrying the initial generator word, 1-based (default 1).
    #[arg(long)]
    site: Option<usize>,
    /// Initial shift exponent: integer for qudit, real for cv (default 1).
    #[arg(long, allow_hyphen_values = true)]
    xexp: Option<String>,
    /// Initial phase exponent: integer for qudit, real for cv (default 0).
    #[arg(long, allow_hyphen_values = true)]
    zexp: Option<String>,
    /// Number of protocol rounds to track (default N+1, a full mirror).
    #[arg(long)]
    rounds: Option<usize>,
}

pub fn run(args: &TrackArgs, config: &RunConfig, out_dir: Option<String>) -> Result<i32, CliError> {
    let mut r = Resolver::new("track", config);
    let mode = r.value("mode", args.mode.clone(), "qudit".to_string())?;
    let d = r.value("d", args.d, 2)?;
    let n = r.value("n", args.n, 4)?;
    let site = r.value("site", args.site, 1)?;
    let xexp = r.value("xexp", args.xexp.clone(), "1".to_string())?;
    let zexp = r.value("zexp", args.zexp.clone(), "0".to_string())?;
    let rounds = r.optional("rounds", args.rounds)?.unwrap_or(n + 1);
    r.record("rounds", rounds);
    let dir = r.value("out_dir", out_dir, ".".to_string())?;
    let resolved = r.finish()?;

    let (doc, steps, summary) = match mode.as_str() {
        "qudit" => {
            let spec = ChainSpec::qudit(n, d).map_err(CliError::module)?;
            let x: i64 = parse_exp(&xexp, "xexp")?;
            let z: i64 = parse_exp(&zexp, "zexp")?;
            let dim = QuditDim::new(d).map_err(CliError::module)?;
            let word = PauliWord::generator(QuditAlgebra::new(dim), site, x, z);
            let traj = mirror_trajectory(&word, &spec, rounds).map_err(CliError::module)?;
            let summary = format!(
                "track: mode=qudit d={d} N={n} start=(site {site}, x^{x} z^{z}) rounds={rounds}"
            );
            (qudit_trajectory_json(&traj), traj.steps.len(), summary)
        }
        "cv" => {
            let spec = ChainSpec::cv(n).map_err(CliError::module)?;
            let x: f64 = parse_exp(&xexp, "xexp")?;
            let z: f64 = parse_exp(&zexp, "zexp")?;
            let word = PauliWord::generator(CvAlgebra, site, x, z);
            let traj = mirror_trajectory(&word, &spec, rounds).map_err(CliError::module)?;
            let summary = format!(
                "track: mode=cv N={n} start=(site {site}, x^{x} z^{z}) rounds={rounds}"
            );
            (cv_trajectory_json(&traj), traj.steps.len(), summary)
        }
        other => {
            return Err(CliError::Config(format!(
                "mode must be qudit or cv, got `{other}`"
            )))
        }
    };

    let mut doc = doc;
    doc["config"] = resolved_json(&resolved);
    let artifacts = Artifacts::new(std::path::Path::new(&dir))?;
    let path = artifacts.write_json("track_trajectory.json", &doc)?;

    println!("{summary} -> {steps} steps");
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn parse_exp<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| CliError::Config(format!("{key} `{raw}`: {e}")))
}
