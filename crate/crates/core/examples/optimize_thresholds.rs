//! Optimize the threshold pair for one channel and compare the result with
//! the single-threshold and final-block-only detectors.
//!
//! ```text
//! cargo run --release --example optimize_thresholds
//! ```

use dualexit::detector::ThresholdPair;
use dualexit::energy::{ChannelState, Constraints, EnergyModel};
use dualexit::experiment::{best_single_threshold, best_terminal_threshold};
use dualexit::optimizer::{optimize_thresholds, PenaltyConfig, Problem};
use dualexit::traces::{generate_population, SyntheticSpec};

fn main() -> dualexit::Result<()> {
    let pop = generate_population(&SyntheticSpec::new(1000, 4, 4.0, 3))?;
    let model = EnergyModel::new(vec![2_000_000, 3_000_000, 4_000_000, 5_000_000], 1e-9, 75_264.0, 1.0)?;
    let ch = ChannelState::from_db(10.0, 30e6)?;
    let cfg = PenaltyConfig::default();

    println!("{:>6} {:>16} {:>8} {:>8} {:>8} {:>8}", "theta", "pair", "f_acc", "p_miss", "single", "terminal");
    for frac in [0.16, 0.25, 0.35, 0.45] {
        let c = Constraints::new(frac * 75_264.0 * 100.0, 2.0, 100)?;
        let problem = Problem::new(&pop, &model, ch, c, cfg.slope)?;
        let opt = optimize_thresholds(&problem, &cfg, &ThresholdPair::new(0.3, 0.7)?)?;
        let single = best_single_threshold(&pop, &model, &ch, &c, 200)?;
        let terminal = best_terminal_threshold(&pop, &model, &ch, &c, 200)?;
        let o = opt.outcome;
        println!(
            "{:>6.2} ({:.3}, {:.3}) {:>8.4} {:>8.4} {:>8} {:>8}",
            frac,
            opt.thresholds.beta_low,
            opt.thresholds.beta_up,
            o.f_acc,
            o.p_miss,
            single.map_or("-".into(), |s| format!("{:.4}", s.p_miss)),
            terminal.map_or("-".into(), |s| format!("{:.4}", s.p_miss)),
        );
        log_trace(&opt);
    }
    Ok(())
}

fn log_trace(opt: &dualexit::optimizer::Optimized) {
    let t = &opt.trace;
    if std::env::var_os("VERBOSE").is_some() {
        println!(
            "    start {:?}, {} outer steps, {} escalations, repaired: {}",
            opt.start.as_array(),
            t.steps.len(),
            t.escalations,
            opt.repaired
        );
    }
}
