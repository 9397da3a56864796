//! Local and transmission energy for a threshold pair across channel
//! qualities, plus the SNR below which offloading is never affordable.
//!
//! ```text
//! cargo run --example energy_budget
//! ```

use dualexit::detector::{Mode, ThresholdPair};
use dualexit::energy::{
    dbm_to_watts, expected_energy, feasibility_snr_floor, linear_to_db, offload_energy, transmission_rate,
    ChannelState, Constraints, EnergyModel,
};
use dualexit::policy::offload_cap;
use dualexit::traces::{generate_population, SyntheticSpec};

fn main() -> dualexit::Result<()> {
    // 4 blocks, 1 nJ per memory access, a 3x56x56 8-bit feature map, 30 dBm
    let model = EnergyModel::new(vec![2_000_000, 3_000_000, 4_000_000, 5_000_000], 1e-9, 75_264.0, dbm_to_watts(30.0))?;
    println!("cumulative local energy (mJ): {:?}", model.cumulative_profile().iter().map(|e| e * 1e3).collect::<Vec<_>>());

    let bandwidth = 30e6;
    let c = Constraints::new(0.3 * 75_264.0 * 100.0, 0.6, 100)?;
    let floor = feasibility_snr_floor(&model, &c, bandwidth)?;
    println!("interval budget {} J for {} events; offloading needs SNR >= {:.2} dB", c.energy_limit, c.n_events, linear_to_db(floor));

    let pop = generate_population(&SyntheticSpec::new(2000, 4, 4.0, 1))?;
    let thr = ThresholdPair::new(0.3, 0.75)?;
    println!("{:>7} {:>10} {:>9} {:>9} {:>9} {:>5}", "snr_dB", "rate_Mbps", "E_off_mJ", "e_loc_mJ", "total_mJ", "cap");
    for db in [-25.0, -20.0, -10.0, 0.0, 10.0, 20.0] {
        let ch = ChannelState::from_db(db, bandwidth)?;
        let b = expected_energy(&pop, &thr, &model, &ch, Mode::Hard)?;
        let cap = offload_cap(&model, &c, &ch, b.e_loc);
        println!(
            "{db:>7.1} {:>10.2} {:>9.3} {:>9.3} {:>9.3} {:>5}",
            transmission_rate(&ch) / 1e6,
            offload_energy(&model, &ch)? * 1e3,
            b.e_loc * 1e3,
            b.e_total * 1e3,
            cap.cap
        );
    }
    Ok(())
}
