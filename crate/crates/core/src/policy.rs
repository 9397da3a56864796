//! Channel-adaptive offloading policy and the coherence-interval simulator.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{hard_classify, Decision, ThresholdPair};
use crate::energy::{feasibility_snr_floor, linear_to_db, offload_energy, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};
use crate::optimizer::LookupTable;
use crate::traces::{ConfidenceTrace, Label, TracePopulation};

/// Slack on the per-interval energy ledger.
pub const LEDGER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffloadCap {
    pub cap: u64,
    /// The budget left after local processing was not positive.
    pub budget_exhausted: bool,
}

/// Largest number of offloads the interval budget affords once every event
/// has spent `e_loc_star` joules locally; zero below the feasibility floor.
pub fn offload_cap(model: &EnergyModel, c: &Constraints, ch: &ChannelState, e_loc_star: f64) -> OffloadCap {
    let exhausted = OffloadCap { cap: 0, budget_exhausted: true };
    let floor = match feasibility_snr_floor(model, c, ch.bandwidth) {
        Ok(f) => f,
        Err(_) => return exhausted,
    };
    if ch.snr < floor {
        return OffloadCap { cap: 0, budget_exhausted: false };
    }
    let budget = c.energy_limit - c.n_events as f64 * e_loc_star;
    if !(budget > 0.0) {
        return exhausted;
    }
    let x = ch.bandwidth * budget * (1.0 + ch.snr).log2() / (model.tx_power * model.payload_bits);
    OffloadCap {
        cap: x.floor() as u64,
        budget_exhausted: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceInterval {
    pub snr: f64,
    pub events: Vec<ConfidenceTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub decision: Decision,
    pub offloaded: bool,
    /// Local plus transmit energy spent on this event.
    pub energy_j: f64,
    /// Offloaded and classified correctly by the server.
    pub credited: bool,
    /// Processing was cut short because the ledger could not afford the
    /// next block.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub thresholds: Option<ThresholdPair>,
    pub m_off_cap: u64,
    pub outcomes: Vec<EventOutcome>,
    /// The SNR's own bin was unusable and a lower bin was used.
    pub fallback: bool,
    pub local_energy_j: f64,
    pub transmit_energy_j: f64,
}

impl PolicyDecision {
    pub fn energy_j(&self) -> f64 {
        self.local_energy_j + self.transmit_energy_j
    }

    pub fn n_offloaded(&self) -> usize {
        self.outcomes.iter().filter(|o| o.offloaded).count()
    }
}

/// Running energy account for one interval. Every unprocessed event keeps
/// block-1 energy in reserve so later events can always be handled.
struct Ledger {
    limit: f64,
    spent: f64,
    reserve_each: f64,
}

impl Ledger {
    fn affords(&self, extra: f64, remaining_after: usize) -> bool {
        self.spent + extra + remaining_after as f64 * self.reserve_each <= self.limit + LEDGER_SLACK
    }
}

/// Processes one interval's events in order.
///
/// Below the feasibility floor, or without a usable table entry, nothing is
/// offloaded: each event runs to the deepest block the budget affords for
/// every event and is labeled head there. Otherwise events are classified
/// with the entry's thresholds; a detected tail is offloaded while the count
/// is under the cap and the ledger covers the transmission, and otherwise
/// stays local as an unrefined tail.
pub fn run_interval(
    interval: &CoherenceInterval,
    table: &LookupTable,
    model: &EnergyModel,
    constraints: &Constraints,
) -> Result<PolicyDecision> {
    if interval.events.len() != constraints.n_events {
        return Err(Error::InvalidArgument(format!(
            "interval has {} events, constraints expect {}",
            interval.events.len(),
            constraints.n_events
        )));
    }
    if let Some(bad) = interval.events.iter().find(|e| e.n_blocks() != model.n_blocks()) {
        return Err(Error::InvalidArgument(format!(
            "event has {} blocks, energy model has {}",
            bad.n_blocks(),
            model.n_blocks()
        )));
    }
    let ch = ChannelState::new(interval.snr, table.bandwidth)?;
    let eloc = model.cumulative_profile();
    let above_floor = table.floor.is_some_and(|f| interval.snr >= f);
    let found = if above_floor { table.lookup(interval.snr) } else { None };

    let Some(found) = found else {
        return Ok(pure_local(interval, &eloc, constraints));
    };
    let thr = found.entry.thresholds.expect("usable entries carry thresholds");
    let cap = offload_cap(model, constraints, &ch, found.entry.e_loc).cap;
    let e_off = offload_energy(model, &ch)?;

    let mut ledger = Ledger {
        limit: constraints.energy_limit,
        spent: 0.0,
        reserve_each: eloc[0],
    };
    let mut offloaded = 0u64;
    let mut local = 0.0;
    let mut transmit = 0.0;
    let n = interval.events.len();
    let mut outcomes = Vec::with_capacity(n);
    for (i, ev) in interval.events.iter().enumerate() {
        let remaining = n - i - 1;
        let full = hard_classify(ev, &thr);
        // deepest block the ledger affords for this event
        let mut depth = 1;
        while depth < full.exit_block && ledger.affords(eloc[depth], remaining) {
            depth += 1;
        }
        let truncated = depth < full.exit_block;
        let decision = if truncated {
            Decision { label: Label::Head, exit_block: depth }
        } else {
            full
        };
        let spent_local = eloc[depth - 1];
        ledger.spent += spent_local;
        local += spent_local;
        let mut out = EventOutcome {
            decision,
            offloaded: false,
            energy_j: spent_local,
            credited: false,
            truncated,
        };
        if decision.label == Label::Tail && offloaded < cap && ledger.affords(e_off, remaining) {
            ledger.spent += e_off;
            transmit += e_off;
            offloaded += 1;
            out.offloaded = true;
            out.energy_j += e_off;
            out.credited = ev.is_tail() && ev.server_correct;
        }
        outcomes.push(out);
    }
    Ok(PolicyDecision {
        thresholds: Some(thr),
        m_off_cap: cap,
        outcomes,
        fallback: found.fallback,
        local_energy_j: local,
        transmit_energy_j: transmit,
    })
}

fn pure_local(interval: &CoherenceInterval, eloc: &[f64], c: &Constraints) -> PolicyDecision {
    let m = c.n_events as f64;
    let depth = eloc
        .iter()
        .rposition(|&e| m * e <= c.energy_limit + LEDGER_SLACK)
        .map_or(1, |i| i + 1);
    let e = eloc[depth - 1];
    let outcomes: Vec<EventOutcome> = interval
        .events
        .iter()
        .map(|_| EventOutcome {
            decision: Decision { label: Label::Head, exit_block: depth },
            offloaded: false,
            energy_j: e,
            credited: false,
            truncated: false,
        })
        .collect();
    PolicyDecision {
        thresholds: None,
        m_off_cap: 0,
        local_energy_j: e * outcomes.len() as f64,
        outcomes,
        fallback: false,
        transmit_energy_j: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub index: usize,
    pub snr_db: f64,
    pub beta_low: Option<f64>,
    pub beta_up: Option<f64>,
    pub m_off_cap: u64,
    pub n_events: usize,
    pub n_tail: usize,
    pub tail_detected: usize,
    pub offloaded: usize,
    pub credited: usize,
    pub energy_j: f64,
    pub bits_sent: f64,
    pub f_acc: f64,
    pub p_miss: f64,
    pub p_off: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_intervals: usize,
    pub n_events: usize,
    pub n_tail: usize,
    pub f_acc: f64,
    pub p_miss: f64,
    pub p_off: f64,
    pub energy_j: f64,
    pub bits_sent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub intervals: Vec<IntervalSummary>,
    pub aggregate: Aggregate,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn summarize(index: usize, interval: &CoherenceInterval, d: &PolicyDecision, payload: f64) -> IntervalSummary {
    let n_tail = interval.events.iter().filter(|e| e.is_tail()).count();
    let tail_detected = interval
        .events
        .iter()
        .zip(&d.outcomes)
        .filter(|(e, o)| e.is_tail() && o.decision.label == Label::Tail)
        .count();
    let offloaded = d.n_offloaded();
    let credited = d.outcomes.iter().filter(|o| o.credited).count();
    IntervalSummary {
        index,
        snr_db: linear_to_db(interval.snr),
        beta_low: d.thresholds.map(|t| t.beta_low),
        beta_up: d.thresholds.map(|t| t.beta_up),
        m_off_cap: d.m_off_cap,
        n_events: interval.events.len(),
        n_tail,
        tail_detected,
        offloaded,
        credited,
        energy_j: d.energy_j(),
        bits_sent: offloaded as f64 * payload,
        f_acc: ratio(credited, n_tail),
        p_miss: 1.0 - ratio(tail_detected, n_tail),
        p_off: ratio(offloaded, interval.events.len()),
        fallback: d.fallback,
    }
}

/// Draws `snrs.len()` intervals of `n_events` events each from `pop`,
/// sampling without replacement within an interval.
pub fn build_intervals(snrs: &[f64], pop: &TracePopulation, n_events: usize, seed: u64) -> Result<Vec<CoherenceInterval>> {
    if n_events > pop.len() {
        return Err(Error::InvalidArgument(format!(
            "interval needs {n_events} events but population has {}",
            pop.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(snrs
        .iter()
        .map(|&snr| CoherenceInterval {
            snr,
            events: pop.traces().choose_multiple(&mut rng, n_events).cloned().collect(),
        })
        .collect())
}

/// Runs independent intervals, possibly concurrently, and aggregates them.
pub fn run_intervals(
    intervals: &[CoherenceInterval],
    table: &LookupTable,
    model: &EnergyModel,
    constraints: &Constraints,
) -> Result<SimulationReport> {
    let decisions: Vec<PolicyDecision> = intervals
        .par_iter()
        .map(|iv| run_interval(iv, table, model, constraints))
        .collect::<Result<_>>()?;
    let rows: Vec<IntervalSummary> = intervals
        .iter()
        .zip(&decisions)
        .enumerate()
        .map(|(i, (iv, d))| summarize(i, iv, d, model.payload_bits))
        .collect();
    Ok(SimulationReport {
        aggregate: aggregate(&rows),
        intervals: rows,
    })
}

fn aggregate(rows: &[IntervalSummary]) -> Aggregate {
    let n_events: usize = rows.iter().map(|r| r.n_events).sum();
    let n_tail: usize = rows.iter().map(|r| r.n_tail).sum();
    let detected: usize = rows.iter().map(|r| r.tail_detected).sum();
    let offloaded: usize = rows.iter().map(|r| r.offloaded).sum();
    let credited: usize = rows.iter().map(|r| r.credited).sum();
    let mut energy: Vec<f64> = rows.iter().map(|r| r.energy_j).collect();
    // order-independent total
    energy.sort_by(f64::total_cmp);
    let mut acc = crate::sum::Neumaier::default();
    energy.iter().for_each(|&e| acc.add(e));
    Aggregate {
        n_intervals: rows.len(),
        n_events,
        n_tail,
        f_acc: ratio(credited, n_tail),
        p_miss: 1.0 - ratio(detected, n_tail),
        p_off: ratio(offloaded, n_events),
        energy_j: acc.value(),
        bits_sent: rows.iter().map(|r| r.bits_sent).sum(),
    }
}

/// One interval per SNR value, events drawn from `pop` with `seed`.
pub fn run_campaign(
    snrs: &[f64],
    pop: &TracePopulation,
    table: &LookupTable,
    model: &EnergyModel,
    constraints: &Constraints,
    seed: u64,
) -> Result<SimulationReport> {
    let intervals = build_intervals(snrs, pop, constraints.n_events, seed)?;
    run_intervals(&intervals, table, model, constraints)
}

impl SimulationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.intervals {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.aggregate).expect("aggregate serializes")
    }

    /// Writes `intervals.csv` and `summary.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("intervals.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let json_path = dir.join("summary.json");
        std::fs::write(&json_path, self.summary_json()).map_err(|e| Error::io(&json_path, e))
    }
}
