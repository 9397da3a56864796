//! Classify a synthetic long-tailed population with a threshold pair and
//! compare hard decisions to the smoothed metrics.
//!
//! ```text
//! cargo run --example detect_events
//! ```

use dualexit::detector::{hard_classify, population_metrics, Mode, ThresholdPair};
use dualexit::traces::{generate_population, Label, SyntheticSpec};

fn main() -> dualexit::Result<()> {
    let pop = generate_population(&SyntheticSpec::new(1000, 4, 4.0, 7))?;
    println!("{} events: {} head, {} tail, {} blocks", pop.len(), pop.n_head(), pop.n_tail(), pop.n_blocks());

    let thr = ThresholdPair::new(0.3, 0.75)?;
    for ev in pop.traces().iter().take(5) {
        let d = hard_classify(ev, &thr);
        let scores: Vec<String> = ev.scores().iter().map(|c| format!("{c:.2}")).collect();
        println!(
            "  [{}] true {:<4} -> {:<4} at block {}",
            scores.join(" "),
            ev.label.as_str(),
            d.label.as_str(),
            d.exit_block
        );
    }

    // exit depth histogram, per class
    let mut depth = [[0usize; 4]; 2];
    for ev in pop.traces() {
        let d = hard_classify(ev, &thr);
        depth[usize::from(ev.label == Label::Tail)][d.exit_block - 1] += 1;
    }
    println!("exit blocks (head): {:?}", depth[0]);
    println!("exit blocks (tail): {:?}", depth[1]);

    println!("{:>10} {:>8} {:>8} {:>8} {:>8}", "mode", "p_miss", "p_false", "p_off", "f_acc");
    for (name, mode) in [
        ("hard", Mode::Hard),
        ("alpha=50", Mode::Smooth { alpha: 50.0 }),
        ("alpha=10", Mode::Smooth { alpha: 10.0 }),
    ] {
        let m = population_metrics(&pop, &thr, mode)?;
        println!("{name:>10} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", m.p_miss, m.p_false, m.p_off, m.f_acc);
    }
    Ok(())
}
