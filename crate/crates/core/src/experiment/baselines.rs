//! Comparison schemes built on the detector primitives: one symmetric
//! threshold applied at every block, and a single decision at the last
//! block.

use serde::{Deserialize, Serialize};

use crate::detector::{hard_classify, ThresholdPair};
use crate::energy::{offload_energy, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};
use crate::traces::{Label, TracePopulation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub tau: f64,
    pub f_acc: f64,
    pub p_miss: f64,
    pub p_off: f64,
    pub v_bits: f64,
    pub energy_j: f64,
    pub feasible: bool,
}

struct Tally {
    tail_hits: usize,
    credited: usize,
    offloads: usize,
    local: f64,
}

fn finish(t: Tally, tau: f64, pop: &TracePopulation, model: &EnergyModel, e_off: f64, c: &Constraints) -> BaselineResult {
    let n = pop.len() as f64;
    let n_tail = pop.n_tail() as f64;
    let m = c.n_events as f64;
    let p_off = t.offloads as f64 / n;
    let v_bits = model.payload_bits * m * p_off;
    let energy_j = m * (t.local / n + e_off * p_off);
    BaselineResult {
        tau,
        f_acc: t.credited as f64 / n_tail,
        p_miss: 1.0 - t.tail_hits as f64 / n_tail,
        p_off,
        v_bits,
        energy_j,
        feasible: v_bits <= c.data_volume_limit && energy_j <= c.energy_limit,
    }
}

/// Exit as tail once the tail confidence exceeds `tau`, as head once the
/// head confidence does, forced head at the last block. Same as the dual
/// pair `(1 - tau, tau)`.
pub fn single_threshold(
    pop: &TracePopulation,
    tau: f64,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
) -> Result<BaselineResult> {
    if !(0.5..1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("single threshold {tau} outside [0.5, 1)")));
    }
    let e_off = offload_energy(model, ch)?;
    let eloc = model.cumulative_profile();
    let thr = ThresholdPair { beta_low: 1.0 - tau, beta_up: tau };
    let mut t = Tally { tail_hits: 0, credited: 0, offloads: 0, local: 0.0 };
    for ev in pop.traces() {
        let d = hard_classify(ev, &thr);
        t.local += eloc[d.exit_block - 1];
        if d.label == Label::Tail {
            t.offloads += 1;
            if ev.is_tail() {
                t.tail_hits += 1;
                t.credited += usize::from(ev.server_correct);
            }
        }
    }
    Ok(finish(t, tau, pop, model, e_off, c))
}

/// Every event runs all blocks; tail iff the last score exceeds `tau`.
pub fn terminal_threshold(
    pop: &TracePopulation,
    tau: f64,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
) -> Result<BaselineResult> {
    let e_off = offload_energy(model, ch)?;
    let e_full = *model.cumulative_profile().last().unwrap();
    let mut t = Tally { tail_hits: 0, credited: 0, offloads: 0, local: 0.0 };
    for ev in pop.traces() {
        t.local += e_full;
        if *ev.scores().last().unwrap() > tau {
            t.offloads += 1;
            if ev.is_tail() {
                t.tail_hits += 1;
                t.credited += usize::from(ev.server_correct);
            }
        }
    }
    Ok(finish(t, tau, pop, model, e_off, c))
}

/// Best feasible result by accuracy, then lower miss rate, then earlier
/// grid point.
fn best(results: Vec<BaselineResult>) -> Option<BaselineResult> {
    results.into_iter().filter(|r| r.feasible).fold(None, |acc, r| match acc {
        Some(a) if (a.f_acc, -a.p_miss) >= (r.f_acc, -r.p_miss) => Some(a),
        _ => Some(r),
    })
}

/// Grid search of the single threshold over `points` values in [0.5, 1).
pub fn best_single_threshold(
    pop: &TracePopulation,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
    points: usize,
) -> Result<Option<BaselineResult>> {
    let res = (0..points)
        .map(|k| single_threshold(pop, 0.5 + 0.5 * k as f64 / points as f64, model, ch, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(best(res))
}

/// Grid search of the terminal threshold over `points` values in (0, 1).
pub fn best_terminal_threshold(
    pop: &TracePopulation,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
    points: usize,
) -> Result<Option<BaselineResult>> {
    let res = (1..=points)
        .map(|k| terminal_threshold(pop, k as f64 / (points + 1) as f64, model, ch, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(best(res))
}
