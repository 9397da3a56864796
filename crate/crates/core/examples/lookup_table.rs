//! Build the SNR-indexed threshold table and print it as CSV.
//!
//! ```text
//! cargo run --release --example lookup_table [out.csv]
//! ```

use dualexit::energy::{Constraints, EnergyModel};
use dualexit::optimizer::{build_lookup_table, snr_grid_db, PenaltyConfig};
use dualexit::traces::{generate_population, SyntheticSpec};

fn main() -> dualexit::Result<()> {
    let pop = generate_population(&SyntheticSpec::new(600, 4, 4.0, 11))?;
    let model = EnergyModel::new(vec![2_000_000, 3_000_000, 4_000_000, 5_000_000], 1e-9, 75_264.0, 1.0)?;
    // tight enough that cheap transmissions matter
    let c = Constraints::new(0.3 * 75_264.0 * 100.0, 0.575, 100)?;
    let cfg = PenaltyConfig::default();
    let grid = snr_grid_db(-30.0, 20.0, cfg.snr_bins);

    let table = build_lookup_table(&pop, &model, 30e6, &grid, &c, &cfg, true)?;
    match std::env::args().nth(1) {
        Some(path) => {
            table.save(&path)?;
            println!("wrote {path}");
        }
        None => table.write_csv(std::io::stdout())?,
    }
    for snr_db in [-27.0, 3.3, 50.0] {
        let snr = dualexit::energy::db_to_linear(snr_db);
        match table.lookup(snr) {
            Some(l) => println!("SNR {snr_db} dB -> bin {} dB, pair {:?}", l.entry.snr_db, l.entry.thresholds.map(|t| t.as_array())),
            None => println!("SNR {snr_db} dB -> below the feasibility floor, local only"),
        }
    }
    Ok(())
}
