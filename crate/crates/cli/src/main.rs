use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use twotime_core::harness::{flops_estimate, flops_full_batch, point_config, run_experiment, ExperimentName, ExperimentSpec, FlopsDims, FlopsKind};
use twotime_core::{load_config, SystemConfig};

/// Runs one experiment sweep and writes its CSV.
#[derive(Parser, Debug)]
#[command(name = "twotime", version, about)]
struct Args {
    /// convergence, aar_vs_power, aar_vs_elements, aar_vs_txantennas, aar_vs_rho or timing_vs_elements
    #[arg(long)]
    experiment: ExperimentName,

    /// `key = value` config file; missing keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed (defaults to the config's rng_seed)
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,

    /// Evaluation frames per sweep point and scheme
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
}

fn run(args: Args) -> anyhow::Result<()> {
    let cfg = match &args.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => SystemConfig::default(),
    };
    let seed = args.seed.unwrap_or(cfg.rng_seed);
    let spec = ExperimentSpec::new(args.experiment, &cfg, &args.out, seed, args.frames as usize);
    let out = run_experiment(&spec, &cfg).with_context(|| format!("running {}", spec.name))?;
    println!("{}: wrote {} rows to {}", spec.name, out.len(), spec.output_path.display());

    if spec.name == ExperimentName::TimingVsElements {
        for &v in &spec.sweep_values {
            let c = point_config(spec.name, &cfg, v)?;
            let d = FlopsDims::from_config(&c);
            println!(
                "N = {v}: flops per iteration mbs {} lbo {} full {}",
                flops_estimate(FlopsKind::Mbs, &d),
                flops_estimate(FlopsKind::Lbo, &d),
                flops_full_batch(&d, c.n_samples as u64)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
