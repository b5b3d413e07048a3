//! `cqed` — integrate the two-resonator device, optionally comparing the
//! full model against its reduced descriptions.

use std::path::Path;

use clap::Args;

use mirrorchain_core::cqed::{
    build_full_model, compare_reduced_dynamics, integrate_lindblad, reference_initial_state,
    BiasSign, DeviceParams,
};
use mirrorchain_core::jsonfmt;

use crate::artifacts::Artifacts;
use crate::config::{resolved_json, Resolver, RunConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Args)]
pub struct CqedArgs {
    /// Flat `key = value` file overriding device parameters (keys: omega0,
    /// omega_a, omega_b, g_a, g_b, gamma, kappa_a, kappa_b, sign; sign is
    /// `+` or `-`).  Unset keys keep the built-in reference device.
    #[arg(long)]
    params_file: Option<String>,
    /// Integration horizon in ns (default 33.3, about 100 resonator
    /// periods).
    #[arg(long)]
    tmax: Option<f64>,
    /// Fock truncation per resonator (default 10).
    #[arg(long)]
    nfock: Option<usize>,
    /// Also integrate the effective and Hamiltonian-only reduced models and
    /// report the distances between all three.
    #[arg(long)]
    compare: bool,
}

pub fn run(args: &CqedArgs, config: &RunConfig, out_dir: Option<String>) -> Result<i32, CliError> {
    let mut r = Resolver::new("cqed", config);
    let params_file = r.optional("params_file", args.params_file.clone())?;
    let tmax = r.value("tmax", args.tmax, 33.3)?;
    let n_fock = r.value("nfock", args.nfock, 10)?;
    let samples = r.value("samples", None, 100usize)?;
    let compare = r.value(
        "compare",
        if args.compare { Some(true) } else { None },
        false,
    )?;
    let dir = r.value("out_dir", out_dir, ".".to_string())?;
    let resolved = r.finish()?;

    if !(tmax > 0.0) {
        return Err(CliError::Config(format!("tmax must be positive, got {tmax}")));
    }
    if samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    let params = match &params_file {
        Some(path) => load_params(Path::new(path))?,
        None => DeviceParams::reference_device(),
    };
    params.validate().map_err(CliError::module)?;

    let t_grid: Vec<f64> = (0..=samples)
        .map(|k| tmax * k as f64 / samples as f64)
        .collect();
    let rho0 = reference_initial_state::<f64>(n_fock);
    let header = device_header(&params, n_fock, tmax, samples);
    let artifacts = Artifacts::new(Path::new(&dir))?;

    if compare {
        let rep =
            compare_reduced_dynamics(&params, &rho0, &t_grid, n_fock).map_err(CliError::module)?;
        let traj_path =
            artifacts.write_text("cqed_trajectory.csv", &(header.clone() + &rep.traj_full.csv()))?;
        let dist_path =
            artifacts.write_text("cqed_distances.csv", &(header + &rep.distances_csv()))?;
        let mut doc = rep.to_json(&params);
        doc["config"] = resolved_json(&resolved);
        let run_path = artifacts.write_json("cqed_run.json", &doc)?;

        let last = rep.d_full_eff.last().copied().unwrap_or(f64::NAN);
        let worst = rep.d_full_eff.iter().copied().fold(0.0f64, f64::max);
        println!(
            "cqed: compared three models to t={} ns over {} samples; full-vs-effective distance max {} final {}",
            jsonfmt::format_f64(tmax),
            samples,
            jsonfmt::format_f64(worst),
            jsonfmt::format_f64(last),
        );
        for p in [&traj_path, &dist_path, &run_path] {
            println!("wrote {}", p.display());
        }
    } else {
        let model = build_full_model(&params, n_fock).map_err(CliError::module)?;
        let traj = integrate_lindblad(&model, &rho0, &t_grid).map_err(CliError::module)?;
        let traj_path = artifacts.write_text("cqed_trajectory.csv", &(header + &traj.csv()))?;
        let doc = serde_json::json!({
            "device": params.to_json(),
            "n_fock": n_fock,
            "t_max": tmax,
            "samples": samples,
            "trace_drift_max": traj.trace_drift_max,
            "top_fock_max": traj.top_fock_max,
            "config": resolved_json(&resolved),
        });
        let run_path = artifacts.write_json("cqed_run.json", &doc)?;
        println!(
            "cqed: integrated full model to t={} ns over {} samples; trace drift max {}",
            jsonfmt::format_f64(tmax),
            samples,
            jsonfmt::format_f64(traj.trace_drift_max),
        );
        for p in [&traj_path, &run_path] {
            println!("wrote {}", p.display());
        }
    }
    Ok(EXIT_OK)
}

/// CSV header comments echoing the device so data files are
/// self-describing.
fn device_header(p: &DeviceParams<f64>, n_fock: usize, tmax: f64, samples: usize) -> String {
    let f = jsonfmt::format_csv_f64;
    format!(
        "# omega0 = {} GHz\n# omega_a = {} GHz\n# omega_b = {} GHz\n# g_a = {} GHz\n# g_b = {} GHz\n# gamma = {} GHz\n# kappa_a = {} GHz\n# kappa_b = {} GHz\n# sign = {}\n# n_fock = {n_fock}\n# t_max = {} ns\n# samples = {samples}\n",
        f(p.omega0),
        f(p.omega_a),
        f(p.omega_b),
        f(p.g_a),
        f(p.g_b),
        f(p.gamma),
        f(p.kappa_a),
        f(p.kappa_b),
        p.sign.symbol(),
        f(tmax),
    )
}

/// Parses a flat `key = value` device file on top of the reference device.
fn load_params(path: &Path) -> Result<DeviceParams<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read params file {}: {e}", path.display())))?;
    let mut p = DeviceParams::reference_device();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "params file {} line {lineno}: expected `key = value`, got `{line}`",
                path.display()
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let num = |slot: &mut f64| -> Result<(), CliError> {
            *slot = value.parse::<f64>().map_err(|e| {
                CliError::Config(format!(
                    "params file {} line {lineno}: {key} = {value}: {e}",
                    path.display()
                ))
            })?;
            Ok(())
        };
        match key {
            "omega0" => num(&mut p.omega0)?,
            "omega_a" => num(&mut p.omega_a)?,
            "omega_b" => num(&mut p.omega_b)?,
            "g_a" => num(&mut p.g_a)?,
            "g_b" => num(&mut p.g_b)?,
            "gamma" => num(&mut p.gamma)?,
            "kappa_a" => num(&mut p.kappa_a)?,
            "kappa_b" => num(&mut p.kappa_b)?,
            "sign" => {
                p.sign = match value {
                    "+" | "plus" => BiasSign::Plus,
                    "-" | "minus" => BiasSign::Minus,
                    other => {
                        return Err(CliError::Config(format!(
                            "params file {} line {lineno}: sign must be + or -, got `{other}`",
                            path.display()
                        )))
                    }
                };
            }
            other => {
                return Err(CliError::Config(format!(
                    "params file {} line {lineno}: unknown key `{other}`",
                    path.display()
                )))
            }
        }
    }
    Ok(p)
}
