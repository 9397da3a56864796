use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dualexit::experiment::{run_sweep, ExperimentConfig, SweepAxis};

/// Run a threshold-optimization sweep and write sweep.csv, constants.txt
/// and summary.json.
#[derive(Parser, Debug)]
#[command(name = "dualexit", version)]
struct Args {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the sweep axis: offload_constraint, energy_constraint, snr
    /// or imbalance_ratio.
    #[arg(long)]
    sweep: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid points evaluated concurrently.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for synthetic traces and interval sampling.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> dualexit::Result<PathBuf> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(axis) = &args.sweep {
        cfg.sweep.axis = axis.parse::<SweepAxis>()?;
    }
    if let Some(out) = &args.out {
        cfg.sweep.out = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.sweep.workers = w;
    }
    if let Some(seed) = args.seed {
        cfg.sweep.seed = seed;
        cfg.traces.synthetic.seed = seed;
    }
    let result = run_sweep(&cfg)?;
    result.save(&cfg.sweep.out)?;
    Ok(cfg.sweep.out)
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    match run(&args) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
