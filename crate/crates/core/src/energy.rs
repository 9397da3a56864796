//! Local and offload energy accounting and the Shannon-rate channel.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionMetrics, ExitSums, Mode, ThresholdPair};
use crate::error::{Error, Result};
use crate::traces::TracePopulation;

/// 3 x 56 x 56 features at 8 bits each.
pub const DEFAULT_PAYLOAD_BITS: f64 = 75_264.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 30e6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mem_ops: Vec<u64>,
    pub energy_per_access: f64,
    pub payload_bits: f64,
    pub tx_power: f64,
}

impl EnergyModel {
    pub fn new(mem_ops: Vec<u64>, energy_per_access: f64, payload_bits: f64, tx_power: f64) -> Result<Self> {
        let m = EnergyModel {
            mem_ops,
            energy_per_access,
            payload_bits,
            tx_power,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mem_ops.is_empty() || self.mem_ops.contains(&0) {
            return Err(Error::InvalidArgument("mem_ops must be a nonempty list of positive counts".into()));
        }
        for (name, v) in [
            ("energy_per_access", self.energy_per_access),
            ("payload_bits", self.payload_bits),
            ("tx_power", self.tx_power),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> usize {
        self.mem_ops.len()
    }

    /// Energy to run blocks 1..=n.
    pub fn cumulative_local_energy(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.n_blocks() {
            return Err(Error::InvalidArgument(format!("block {n} outside 1..={}", self.n_blocks())));
        }
        Ok(self.cumulative_profile()[n - 1])
    }

    /// `E_loc(n)` for every n.
    pub fn cumulative_profile(&self) -> Vec<f64> {
        let mut acc = 0u64;
        self.mem_ops
            .iter()
            .map(|&s| {
                acc += s;
                acc as f64 * self.energy_per_access
            })
            .collect()
    }

    fn check_population(&self, pop: &TracePopulation) -> Result<()> {
        if pop.n_blocks() != self.n_blocks() {
            return Err(Error::InvalidArgument(format!(
                "population has {} blocks but energy model has {}",
                pop.n_blocks(),
                self.n_blocks()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Linear SNR.
    pub snr: f64,
    pub bandwidth: f64,
}

impl ChannelState {
    pub fn new(snr: f64, bandwidth: f64) -> Result<Self> {
        if !(snr >= 0.0 && snr.is_finite()) || !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "channel needs snr >= 0 and bandwidth > 0, got snr {snr}, bandwidth {bandwidth}"
            )));
        }
        Ok(ChannelState { snr, bandwidth })
    }

    pub fn from_db(snr_db: f64, bandwidth: f64) -> Result<Self> {
        Self::new(db_to_linear(snr_db), bandwidth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Bits allowed per coherence interval.
    pub data_volume_limit: f64,
    /// Joules allowed per coherence interval.
    pub energy_limit: f64,
    /// Events per coherence interval.
    pub n_events: usize,
}

impl Constraints {
    pub fn new(data_volume_limit: f64, energy_limit: f64, n_events: usize) -> Result<Self> {
        if !(data_volume_limit > 0.0) || !(energy_limit > 0.0) || n_events == 0 {
            return Err(Error::InvalidArgument("constraints must be positive".into()));
        }
        Ok(Constraints {
            data_volume_limit,
            energy_limit,
            n_events,
        })
    }
}

/// Shannon rate in bits per second.
pub fn transmission_rate(ch: &ChannelState) -> f64 {
    ch.bandwidth * (1.0 + ch.snr).log2()
}

/// Energy to transmit one event's payload.
pub fn offload_energy(model: &EnergyModel, ch: &ChannelState) -> Result<f64> {
    let rate = transmission_rate(ch);
    if !(rate > 0.0) {
        return Err(Error::InfeasibleChannel {
            snr: ch.snr,
            floor: f64::NAN,
        });
    }
    Ok(model.tx_power * model.payload_bits / rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_loc: f64,
    pub e_off: f64,
    pub e_total: f64,
}

impl EnergyBreakdown {
    /// Interval energy for `n_events` events.
    pub fn per_interval(&self, n_events: usize) -> f64 {
        n_events as f64 * self.e_total
    }
}

/// Mean per-event energy under the given detection mode.
pub fn expected_energy(
    pop: &TracePopulation,
    thr: &ThresholdPair,
    model: &EnergyModel,
    ch: &ChannelState,
    mode: Mode,
) -> Result<EnergyBreakdown> {
    model.check_population(pop)?;
    let e_off_unit = offload_energy(model, ch)?;
    let s = ExitSums::compute(pop, thr.as_array(), mode, &model.cumulative_profile(), false);
    Ok(breakdown(&s, e_off_unit))
}

pub(crate) fn breakdown(s: &ExitSums, e_off_unit: f64) -> EnergyBreakdown {
    let n = s.n as f64;
    let e_loc = s.local.value() / n;
    let e_off = e_off_unit * s.offloads.value() / n;
    EnergyBreakdown {
        e_loc,
        e_off,
        e_total: e_loc + e_off,
    }
}

/// Detection metrics with the energy expectations filled in.
pub fn metrics_with_energy(
    pop: &TracePopulation,
    thr: &ThresholdPair,
    model: &EnergyModel,
    ch: &ChannelState,
    mode: Mode,
) -> Result<DetectionMetrics> {
    model.check_population(pop)?;
    let e_off_unit = offload_energy(model, ch)?;
    let s = ExitSums::compute(pop, thr.as_array(), mode, &model.cumulative_profile(), false);
    let mut m = s.metrics()?;
    let b = breakdown(&s, e_off_unit);
    m.e_loc_mean = Some(b.e_loc);
    m.e_off_mean = Some(b.e_off);
    Ok(m)
}

/// Residual budget after every event exits at block 1.
fn residual_budget(model: &EnergyModel, c: &Constraints) -> Result<f64> {
    let block1 = c.n_events as f64 * model.cumulative_profile()[0];
    if c.energy_limit <= block1 {
        return Err(Error::InfeasibleBudget {
            energy_limit: c.energy_limit,
            block1_energy: block1,
        });
    }
    Ok(c.energy_limit - block1)
}

/// Smallest linear SNR at which one offload fits the budget left after
/// block-1 processing of every event.
pub fn feasibility_snr_floor(model: &EnergyModel, c: &Constraints, bandwidth: f64) -> Result<f64> {
    let budget = residual_budget(model, c)?;
    let exponent = model.tx_power * model.payload_bits / (bandwidth * budget);
    Ok(exponent.exp2() - 1.0)
}

/// Whether the channel clears the feasibility floor.
pub fn offload_feasible(model: &EnergyModel, c: &Constraints, ch: &ChannelState) -> bool {
    matches!(feasibility_snr_floor(model, c, ch.bandwidth), Ok(f) if ch.snr >= f)
}
