mod common;

use common::*;
use dualexit::detector::{Mode, ThresholdPair};
use dualexit::energy::*;
use dualexit::policy::{run_interval, CoherenceInterval};
use dualexit::optimizer::{LookupTable, TableEntry, EntryStatus};
use dualexit::Error;
use rand::Rng;

#[test]
fn cumulative_energy_examples() {
    let m = EnergyModel::new(vec![100, 200, 300], 1e-6, 1.0, 1.0).unwrap();
    assert!((m.cumulative_local_energy(1).unwrap() - 1e-4).abs() < 1e-18);
    assert!((m.cumulative_local_energy(3).unwrap() - 6e-4).abs() < 1e-18);
    for n in 1..3 {
        let d = m.cumulative_local_energy(n + 1).unwrap() - m.cumulative_local_energy(n).unwrap();
        assert!((d - 1e-6 * m.mem_ops[n] as f64).abs() < 1e-18);
    }
    assert!(m.cumulative_local_energy(0).is_err());
    assert!(m.cumulative_local_energy(4).is_err());
}

#[test]
fn rate_and_offload_energy() {
    assert_eq!(transmission_rate(&ChannelState::new(0.0, 1e6).unwrap()), 0.0);
    assert!((transmission_rate(&ChannelState::new(1.0, 1e6).unwrap()) - 1e6).abs() < 1e-6);
    assert!((transmission_rate(&ChannelState::new(3.0, 30e6).unwrap()) - 60e6).abs() < 1e-6);

    let m = EnergyModel::new(vec![1], 1e-9, 1e6, 1.0).unwrap();
    assert!((offload_energy(&m, &ChannelState::new(1.0, 1e6).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    let e1 = offload_energy(&m, &ChannelState::new(1.0, 1e6).unwrap()).unwrap();
    let e3 = offload_energy(&m, &ChannelState::new(3.0, 1e6).unwrap()).unwrap();
    assert!((e1 / e3 - 2.0).abs() < 1e-12);
    assert!(matches!(offload_energy(&m, &ChannelState::new(0.0, 1e6).unwrap()), Err(Error::InfeasibleChannel { .. })));

    let m = EnergyModel::new(vec![1], 1e-9, (3 * 56 * 56 * 8) as f64, dbm_to_watts(30.0)).unwrap();
    let e = offload_energy(&m, &ChannelState::new(1.0, 30e6).unwrap()).unwrap();
    assert!((e - 75264.0 / 30e6).abs() < 1e-15);
    assert!((e - 2.5088e-3).abs() < 1e-7);
}

#[test]
fn unit_conversions() {
    assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
    assert!((watts_to_dbm(0.1) - 20.0).abs() < 1e-12);
    assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
    assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
}

#[test]
fn floor_examples() {
    let m = EnergyModel::new(vec![1000], 1e-6, 1e6, 1.0).unwrap();
    // M * S1 * rho = 10 * 1e-3 = 0.01, residual 1
    let c = Constraints::new(1.0, 1.01, 10).unwrap();
    assert!((feasibility_snr_floor(&m, &c, 1e6).unwrap() - 1.0).abs() < 1e-12);
    assert!((feasibility_snr_floor(&m, &c, 2e6).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    let tiny = EnergyModel::new(vec![1000], 1e-6, 1e-9, 1.0).unwrap();
    assert!(feasibility_snr_floor(&tiny, &c, 1e6).unwrap() < 1e-14);
    let c = Constraints::new(1.0, 0.01, 10).unwrap();
    assert!(matches!(feasibility_snr_floor(&m, &c, 1e6), Err(Error::InfeasibleBudget { .. })));
}

#[test]
fn forced_exits() {
    let pop = synthetic(200, 3, 4.0, 4);
    let (model, ch) = toy_energy(3, 2e-3);
    let e1 = model.cumulative_local_energy(1).unwrap();
    // every score is above 1e-9 and below the low threshold only if low is huge; use extremes
    let all_head = ThresholdPair { beta_low: 0.999999, beta_up: 0.9999995 };
    let b = expected_energy(&pop, &all_head, &model, &ch, Mode::Hard).unwrap();
    assert!((b.e_total - e1).abs() < 1e-15 && b.e_off == 0.0);
    let all_tail = ThresholdPair { beta_low: 1e-7, beta_up: 2e-7 };
    let b = expected_energy(&pop, &all_tail, &model, &ch, Mode::Hard).unwrap();
    assert!((b.e_off - 2e-3).abs() < 1e-15);
    assert!((b.e_total - (b.e_loc + b.e_off)).abs() == 0.0);
}

#[test]
fn hard_energy_matches_oracle_and_is_additive() {
    let mut r = rng(12);
    for _ in 0..50 {
        let pop = random_population(&mut r, 80, 4);
        let (model, ch) = toy_energy(4, r.gen_range(1e-3..4e-3));
        let e_off = offload_energy(&model, &ch).unwrap();
        let x = [r.gen_range(0.05..0.45), r.gen_range(0.55..0.95)];
        let thr = ThresholdPair::new(x[0], x[1]).unwrap();
        let c = Constraints::new(1.0, 1.0, 1).unwrap();
        let want = naive_hard_eval(&pop, x[0], x[1], &model, e_off, &c).energy;
        let b = expected_energy(&pop, &thr, &model, &ch, Mode::Hard).unwrap();
        assert!(rel_err(b.e_total, want) < 1e-12);
        for a in [5.0, 50.0] {
            let s = expected_energy(&pop, &thr, &model, &ch, Mode::Smooth { alpha: a }).unwrap();
            assert_eq!(s.e_total, s.e_loc + s.e_off);
        }
    }
}

#[test]
fn hard_energy_matches_simulator_ledger() {
    // population of exactly one interval, loose budget, no cap pressure
    let pop = synthetic(100, 4, 4.0, 13);
    let (model, ch) = toy_energy(4, 2e-3);
    let thr = ThresholdPair::new(0.3, 0.7).unwrap();
    let c = Constraints::new(1e9, 1e3, 100).unwrap();
    let entry = TableEntry {
        snr_db: linear_to_db(ch.snr),
        snr: ch.snr,
        thresholds: Some(thr),
        f_acc: 0.0,
        v_bits: 0.0,
        energy_j: 0.0,
        e_loc: 0.0,
        psi: 1.0,
        eta: 1.0,
        status: EntryStatus::Ok,
    };
    let table = LookupTable { bandwidth: ch.bandwidth, floor: Some(0.0), entries: vec![entry], infeasible: vec![] };
    let iv = CoherenceInterval { snr: ch.snr, events: pop.traces().to_vec() };
    let d = run_interval(&iv, &table, &model, &c).unwrap();
    let b = expected_energy(&pop, &thr, &model, &ch, Mode::Hard).unwrap();
    assert!((d.energy_j() / 100.0 - b.e_total).abs() < 1e-12);
}

#[test]
fn floor_boundary_is_sharp() {
    let m = EnergyModel::new(vec![2_000_000, 3_000_000], 1e-9, 75_264.0, 1.0).unwrap();
    let c = Constraints::new(1e9, 0.25, 100).unwrap();
    let f = feasibility_snr_floor(&m, &c, 30e6).unwrap();
    let e1 = 100.0 * m.cumulative_local_energy(1).unwrap();
    for (k, ok) in [(1.0 + 1e-6, true), (1.0 - 1e-6, false)] {
        let ch = ChannelState::new(f * k, 30e6).unwrap();
        assert_eq!(offload_energy(&m, &ch).unwrap() <= c.energy_limit - e1, ok);
        assert_eq!(offload_feasible(&m, &c, &ch), ok);
    }
}

#[test]
fn invalid_inputs() {
    assert!(EnergyModel::new(vec![], 1e-9, 1.0, 1.0).is_err());
    assert!(EnergyModel::new(vec![1], -1e-9, 1.0, 1.0).is_err());
    assert!(ChannelState::new(-1.0, 1.0).is_err());
    assert!(ChannelState::new(1.0, 0.0).is_err());
    assert!(Constraints::new(-1.0, 1.0, 1).is_err());
    assert!(Constraints::new(1.0, 1.0, 0).is_err());
    let pop = synthetic(20, 3, 4.0, 1);
    let (model, ch) = toy_energy(2, 1e-3);
    assert!(expected_energy(&pop, &ThresholdPair::new(0.3, 0.7).unwrap(), &model, &ch, Mode::Hard).is_err());
}
