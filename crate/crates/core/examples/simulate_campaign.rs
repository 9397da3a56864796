//! Run the per-interval policy over a fading channel and report what
//! actually got offloaded.
//!
//! ```text
//! cargo run --release --example simulate_campaign [out_dir]
//! ```

use dualexit::energy::{db_to_linear, Constraints, EnergyModel};
use dualexit::optimizer::{build_lookup_table, snr_grid_db, PenaltyConfig};
use dualexit::policy::run_campaign;
use dualexit::traces::{generate_population, SyntheticSpec};
use rand::SeedableRng;
use rand_distr::{Distribution, Exp};

fn main() -> dualexit::Result<()> {
    let pop = generate_population(&SyntheticSpec::new(2000, 4, 4.0, 5))?;
    let model = EnergyModel::new(vec![2_000_000, 3_000_000, 4_000_000, 5_000_000], 1e-9, 75_264.0, 1.0)?;
    let c = Constraints::new(0.3 * 75_264.0 * 100.0, 0.575, 100)?;
    let table = build_lookup_table(&pop, &model, 30e6, &snr_grid_db(-20.0, 25.0, 10), &c, &PenaltyConfig::default(), true)?;

    // Rayleigh fading: exponential power around a 5 dB mean
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let fading = Exp::new(1.0).expect("positive rate");
    let snrs: Vec<f64> = (0..200).map(|_| db_to_linear(5.0) * fading.sample(&mut rng)).collect();

    let rep = run_campaign(&snrs, &pop, &table, &model, &c, 9)?;
    let a = rep.aggregate;
    println!("{} intervals, {} events ({} tail)", a.n_intervals, a.n_events, a.n_tail);
    println!("f_acc {:.4}  p_miss {:.4}  offloaded {:.4}", a.f_acc, a.p_miss, a.p_off);
    println!("energy {:.3} J total, {:.1} Mbit sent", a.energy_j, a.bits_sent / 1e6);
    let local_only = rep.intervals.iter().filter(|i| i.beta_low.is_none()).count();
    println!("{local_only} intervals fell below the feasibility floor");
    if let Some(dir) = std::env::args().nth(1) {
        rep.save(&dir)?;
        println!("wrote {dir}/intervals.csv and {dir}/summary.json");
    }
    Ok(())
}
