use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{dbm_to_watts, Constraints, EnergyModel, DEFAULT_BANDWIDTH_HZ, DEFAULT_PAYLOAD_BITS};
use crate::error::{Error, Result};
use crate::optimizer::PenaltyConfig;
use crate::traces::{generate_population, load_population, SyntheticSpec, TracePopulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Grid values are offloaded fractions of the interval's events;
    /// theta = value * D * M.
    OffloadConstraint,
    /// Grid values are interval energy budgets in joules.
    EnergyConstraint,
    /// Grid values are SNRs in dB.
    Snr,
    /// Grid values are head:tail ratios; needs a synthetic trace source.
    ImbalanceRatio,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::OffloadConstraint => "offload_constraint",
            SweepAxis::EnergyConstraint => "energy_constraint",
            SweepAxis::Snr => "snr",
            SweepAxis::ImbalanceRatio => "imbalance_ratio",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offload_constraint" => Ok(SweepAxis::OffloadConstraint),
            "energy_constraint" => Ok(SweepAxis::EnergyConstraint),
            "snr" => Ok(SweepAxis::Snr),
            "imbalance_ratio" => Ok(SweepAxis::ImbalanceRatio),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected offload_constraint, energy_constraint, snr or imbalance_ratio)"
            ))),
        }
    }
}

/// `[traces]`: a trace file, or the synthetic generator's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracesSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub synthetic: SyntheticSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub mem_ops: Vec<u64>,
    pub energy_per_access: f64,
    pub payload_bits: f64,
    pub tx_power_dbm: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            mem_ops: vec![2_000_000, 3_000_000, 4_000_000, 5_000_000],
            energy_per_access: 1e-9,
            payload_bits: DEFAULT_PAYLOAD_BITS,
            tx_power_dbm: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub bandwidth: f64,
    /// Operating SNR for sweeps along other axes.
    pub snr_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            bandwidth: DEFAULT_BANDWIDTH_HZ,
            snr_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintsSection {
    pub n_events: usize,
    /// Data-volume limit in bits per interval. Overrides `offload_fraction`.
    pub data_volume_limit: Option<f64>,
    /// Data-volume limit as a fraction of the interval's events.
    pub offload_fraction: f64,
    /// Joules per interval.
    pub energy_limit: f64,
}

impl Default for ConstraintsSection {
    fn default() -> Self {
        ConstraintsSection {
            n_events: 100,
            data_volume_limit: None,
            offload_fraction: 0.3,
            energy_limit: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub out: PathBuf,
    /// Intervals simulated per grid point on the SNR axis.
    pub simulate_intervals: usize,
    pub workers: usize,
    /// Seed for interval sampling; also replaces the synthetic trace seed
    /// when given on the command line.
    pub seed: u64,
    /// Points of the one-dimensional baseline threshold grids.
    pub baseline_grid: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: SweepAxis::OffloadConstraint,
            grid: vec![0.16, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45],
            out: PathBuf::from("out"),
            simulate_intervals: 20,
            workers: 1,
            seed: 0,
            baseline_grid: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub traces: TracesSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub constraints: ConstraintsSection,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative trace paths are taken from the config's directory
        if let (Some(p), Some(dir)) = (&cfg.traces.path, path.parent()) {
            if p.is_relative() {
                cfg.traces.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if s.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep grid must be strictly increasing".into()));
        }
        if s.axis == SweepAxis::ImbalanceRatio && self.traces.path.is_some() {
            return Err(Error::Config("imbalance_ratio sweeps need synthetic traces".into()));
        }
        if s.baseline_grid < 2 {
            return Err(Error::Config("baseline_grid must be at least 2".into()));
        }
        if self.traces.path.is_none() && self.traces.synthetic.n_blocks != self.energy.mem_ops.len() {
            return Err(Error::Config(format!(
                "synthetic traces have {} blocks but energy.mem_ops lists {}",
                self.traces.synthetic.n_blocks,
                self.energy.mem_ops.len()
            )));
        }
        if self.constraints.n_events == 0 {
            return Err(Error::Config("n_events must be positive".into()));
        }
        self.energy_model()?;
        self.penalty.validate()
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        let e = &self.energy;
        EnergyModel::new(e.mem_ops.clone(), e.energy_per_access, e.payload_bits, dbm_to_watts(e.tx_power_dbm))
    }

    pub fn constraints(&self) -> Result<Constraints> {
        let c = &self.constraints;
        let theta = c
            .data_volume_limit
            .unwrap_or(c.offload_fraction * self.energy.payload_bits * c.n_events as f64);
        Constraints::new(theta, c.energy_limit, c.n_events)
    }

    pub fn population(&self) -> Result<TracePopulation> {
        match &self.traces.path {
            Some(p) => load_population(p),
            None => generate_population(&self.traces.synthetic),
        }
    }
}
