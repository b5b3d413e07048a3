//! `cv` — apply the continuous-variable mirror map to a Gaussian state.

use std::path::Path;

use clap::Args;
use ndarray::{Array1, Array2};

use mirrorchain_core::gaussian::{cv_mirror_json, cv_mirror_map, run_cv_mirror, GaussianState};
use mirrorchain_core::jsonfmt;

use crate::artifacts::Artifacts;
use crate::config::{resolved_json, Resolver, RunConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Number of chain modes (default 2; taken from the state file when
    /// one is given).
    #[arg(long)]
    n: Option<usize>,
    /// JSON file holding the input state as {"N": modes, "mean": [2N],
    /// "cov": [2N][2N]} in (q1,p1,…,qN,pN) ordering.  Default input: a
    /// coherent state with amplitude 1 on the first mode.
    #[arg(long)]
    state_file: Option<String>,
}

pub fn run(args: &CvArgs, config: &RunConfig, out_dir: Option<String>) -> Result<i32, CliError> {
    let mut r = Resolver::new("cv", config);
    let n_flag = r.optional("n", args.n)?;
    let state_file = r.optional("state_file", args.state_file.clone())?;
    let dir = r.value("out_dir", out_dir, ".".to_string())?;

    let state = match &state_file {
        Some(path) => {
            let state = load_state(Path::new(path))?;
            if let Some(n) = n_flag {
                if n != state.n_modes() {
                    return Err(CliError::Config(format!(
                        "state file {path} holds N={} modes but N={n} was requested",
                        state.n_modes()
                    )));
                }
            }
            state
        }
        None => {
            let n = n_flag.unwrap_or(2);
            GaussianState::coherent(n, 1, 1.0, 0.0).map_err(CliError::module)?
        }
    };
    r.record("n", state.n_modes());
    let resolved = r.finish()?;

    let output = run_cv_mirror(&state).map_err(CliError::module)?;
    let map = cv_mirror_map::<f64>(state.n_modes()).map_err(CliError::module)?;

    let mut doc = cv_mirror_json(&state, &output);
    doc["map_symplectic_deviation"] = serde_json::Value::from(map.symplectic_deviation());
    doc["config"] = resolved_json(&resolved);
    let artifacts = Artifacts::new(Path::new(&dir))?;
    let path = artifacts.write_json("cv_mirror.json", &doc)?;

    let deviation = doc["deviation"].as_f64().unwrap_or(f64::NAN);
    println!(
        "cv: N={} mode-reversal deviation {} (map symplectic to {})",
        state.n_modes(),
        jsonfmt::format_f64(deviation),
        jsonfmt::format_f64(map.symplectic_deviation()),
    );
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

/// Parses a state file {"N", "mean", "cov"} into a validated state.
fn load_state(path: &Path) -> Result<GaussianState<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read state file {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("state file {}: {e}", path.display())))?;
    let bad = |msg: &str| CliError::Config(format!("state file {}: {msg}", path.display()));

    let n = doc["N"]
        .as_u64()
        .ok_or_else(|| bad("missing integer field N"))? as usize;
    let mean_raw = doc["mean"]
        .as_array()
        .ok_or_else(|| bad("missing array field mean"))?;
    let mean: Vec<f64> = mean_raw
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| bad("mean entries must be numbers")))
        .collect::<Result<_, _>>()?;
    let cov_raw = doc["cov"]
        .as_array()
        .ok_or_else(|| bad("missing array field cov"))?;
    let mut cov_rows: Vec<Vec<f64>> = Vec::with_capacity(cov_raw.len());
    for row in cov_raw {
        let row = row
            .as_array()
            .ok_or_else(|| bad("cov must be an array of rows"))?;
        cov_rows.push(
            row.iter()
                .map(|v| v.as_f64().ok_or_else(|| bad("cov entries must be numbers")))
                .collect::<Result<_, _>>()?,
        );
    }
    let rows = cov_rows.len();
    let cols = cov_rows.first().map_or(0, Vec::len);
    if cov_rows.iter().any(|r| r.len() != cols) {
        return Err(bad("cov rows have unequal lengths"));
    }
    let mean = Array1::from_vec(mean);
    let cov = Array2::from_shape_vec((rows, cols), cov_rows.concat())
        .map_err(|e| bad(&format!("cov shape: {e}")))?;
    GaussianState::from_parts(n, mean, cov).map_err(CliError::module)
}
