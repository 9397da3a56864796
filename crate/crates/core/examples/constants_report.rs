//! Print every derived constant for a configuration: smoothness and
//! convexity bounds, the minimal proximal weight, and the feasibility floor.
//!
//! ```text
//! cargo run --example constants_report [config.toml]
//! ```

use dualexit::experiment::{dump_constants, ExperimentConfig};

fn main() -> dualexit::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/snr_sweep.toml"))?,
    };
    print!("{}", dump_constants(&cfg)?);
    Ok(())
}
