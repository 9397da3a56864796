//! Sweep one axis from a config file, as the `dualexit` binary does, and
//! print the resulting table.
//!
//! ```text
//! cargo run --release --example tradeoff_sweep -- crates/core/examples/configs/offload_sweep.toml
//! ```

use dualexit::experiment::{run_sweep, ExperimentConfig};

fn main() -> dualexit::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/offload_sweep.toml").into());
    let cfg = ExperimentConfig::load(&path)?;
    let res = run_sweep(&cfg)?;
    println!(
        "{:>8} {:>10} {:>8} {:>8} {:>8} {:>8}",
        res.axis.as_str().split('_').next().unwrap_or(""),
        "status",
        "dual",
        "single",
        "terminal",
        "p_off"
    );
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    for r in &res.rows {
        println!(
            "{:>8} {:>10} {:>8} {:>8} {:>8} {:>8}",
            r.value,
            r.status,
            f(r.p_miss),
            f(r.single_p_miss),
            f(r.terminal_p_miss),
            f(r.p_off)
        );
    }
    Ok(())
}
