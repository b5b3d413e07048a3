//! `grape` — synthesize the squared-quadrature gate pulse by multi-start
//! gradient ascent.

use std::path::Path;

use clap::Args;

use mirrorchain_core::grape::{
    assemble_cphase, optimize_multistart, squared_quadrature_gate, ControlProblem,
};
use mirrorchain_core::jsonfmt;

use crate::artifacts::Artifacts;
use crate::config::{resolved_json, Resolver, RunConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Args)]
pub struct GrapeArgs {
    /// Fock truncation (default 20).
    #[arg(long)]
    nfock: Option<usize>,
    /// Number of piecewise-constant slices (default 500).
    #[arg(long)]
    slices: Option<usize>,
    /// Pulse length in free-oscillation cycles (default 50).
    #[arg(long)]
    cycles: Option<f64>,
    /// Control bound: every |C| is clamped to this (default 1).
    #[arg(long)]
    cmax: Option<f64>,
    /// Comma-separated list of multi-start seeds (default 1,2,3,4,5).
    #[arg(long)]
    seeds: Option<String>,
}

pub fn run(args: &GrapeArgs, config: &RunConfig, out_dir: Option<String>) -> Result<i32, CliError> {
    let mut r = Resolver::new("grape", config);
    let n_fock = r.value("nfock", args.nfock, 20)?;
    let n_slices = r.value("slices", args.slices, 500)?;
    let cycles = r.value("cycles", args.cycles, 50.0)?;
    let c_max = r.value("cmax", args.cmax, 1.0)?;
    let seeds_raw = r.value("seeds", args.seeds.clone(), "1,2,3,4,5".to_string())?;
    let epsilon = r.value("epsilon", None, 1e-3)?;
    let max_iter = r.value("max_iter", None, 2000usize)?;
    let tol = r.value("tol", None, 1e-2)?;
    let dir = r.value("out_dir", out_dir, ".".to_string())?;
    let resolved = r.finish()?;

    let seeds: Vec<u64> = seeds_raw
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("seeds entry `{tok}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(CliError::Config("need at least one seed".into()));
    }
    if !(cycles > 0.0) {
        return Err(CliError::Config(format!("cycles must be positive, got {cycles}")));
    }

    let duration = cycles * 2.0 * std::f64::consts::PI;
    let target = squared_quadrature_gate::<f64>(n_fock, 0.1);
    let prob = ControlProblem::new(n_fock, epsilon, duration, n_slices, c_max, target)
        .map_err(CliError::module)?;

    let trace = optimize_multistart(&prob, &seeds, max_iter, tol).map_err(CliError::module)?;
    let schedule = assemble_cphase(&prob, &trace.final_pulse).map_err(CliError::module)?;

    let artifacts = Artifacts::new(Path::new(&dir))?;
    let pulse_path = artifacts.write_text("grape_pulse.csv", &trace.final_pulse.csv())?;
    let mut doc = trace.to_json(&prob);
    doc["seeds"] = serde_json::Value::from(seeds.clone());
    doc["cphase_schedule"] = schedule.to_json();
    doc["config"] = resolved_json(&resolved);
    let run_path = artifacts.write_json("grape_run.json", &doc)?;

    println!(
        "grape: best fidelity {} after {} accepted steps (seed {}, {})",
        jsonfmt::format_f64(trace.final_fidelity),
        trace.iterations.len().saturating_sub(1),
        trace.seed.map_or("-".to_string(), |s| s.to_string()),
        if trace.converged { "converged" } else { "not converged" },
    );
    for p in [&pulse_path, &run_path] {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}
