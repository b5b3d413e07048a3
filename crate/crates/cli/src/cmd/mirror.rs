//! `mirror` — run the full mirror protocol on a dense qudit chain state.

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mirrorchain_core::chain::{mirror_fidelity, mirror_report_json, StateSpace};
use mirrorchain_core::jsonfmt;

use crate::artifacts::Artifacts;
use crate::config::{resolved_json, Resolver, RunConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Args)]
pub struct MirrorArgs {
    /// Local dimension of every site (default 3).
    #[arg(long)]
    d: Option<usize>,
    /// Number of chain sites (default 4).
    #[arg(long)]
    n: Option<usize>,
    /// Sign of the final global Fourier-square pulse: 2 or -2 (default 2).
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<i32>,
    /// Input family: basis, random, or figure2a (default random).
    #[arg(long)]
    input: Option<String>,
    /// Seed for the random and figure2a inputs (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Basis digits for `--input basis`, comma-separated, one per site
    /// (default: the staircase 0,1,2,… mod d).
    #[arg(long)]
    digits: Option<String>,
}

pub fn run(args: &MirrorArgs, config: &RunConfig, out_dir: Option<String>) -> Result<i32, CliError> {
    let mut r = Resolver::new("mirror", config);
    let d = r.value("d", args.d, 3)?;
    let n = r.value("n", args.n, 4)?;
    let sign = r.value("sign", args.sign, 2)?;
    let input = r.value("input", args.input.clone(), "random".to_string())?;
    let seed = r.value("seed", args.seed, 7)?;
    let digits_raw = r.optional("digits", args.digits.clone())?;
    let dir = r.value("out_dir", out_dir, ".".to_string())?;

    if sign != 2 && sign != -2 {
        return Err(CliError::Config(format!("sign must be 2 or -2, got {sign}")));
    }
    let space = StateSpace::new(d, n).map_err(CliError::module)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (state, input_spec) = match input.as_str() {
        "basis" => {
            let digits: Vec<usize> = match &digits_raw {
                Some(raw) => parse_digits(raw)?,
                None => (0..n).map(|i| i % d).collect(),
            };
            let spec = format!(
                "basis[{}]",
                digits.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            );
            r.record("digits", digits.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            (space.basis_state::<f64>(&digits).map_err(CliError::module)?, spec)
        }
        "random" => (space.random_state::<f64>(&mut rng), "random".to_string()),
        "figure2a" => {
            // The payload family: a random single-site payload on site 1
            // with the alternating |0⟩/|+⟩ ancilla pattern behind it.
            let payload = space.random_site_vector::<f64>(&mut rng);
            let state = space.payload_family_state(&payload).map_err(CliError::module)?;
            (state, "figure2a".to_string())
        }
        other => {
            return Err(CliError::Config(format!(
                "input must be basis, random, or figure2a, got `{other}`"
            )))
        }
    };
    let resolved = r.finish()?;

    let output = state.run_mirror_protocol(sign);
    let report = mirror_fidelity(&state, &output).map_err(CliError::module)?;

    let mut doc = mirror_report_json(&space, sign, &input_spec, &report, None);
    doc["config"] = resolved_json(&resolved);
    let artifacts = Artifacts::new(std::path::Path::new(&dir))?;
    let path = artifacts.write_json("mirror_report.json", &doc)?;

    println!(
        "mirror: d={d} N={n} sign={sign:+} input={input_spec} fidelity={} max_deviation={}",
        jsonfmt::format_f64(report.fidelity),
        jsonfmt::format_f64(report.max_deviation),
    );
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn parse_digits(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("digits entry `{tok}`: {e}")))
        })
        .collect()
}
