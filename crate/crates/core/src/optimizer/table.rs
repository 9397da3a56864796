use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::ThresholdPair;
use crate::energy::{db_to_linear, feasibility_snr_floor, linear_to_db, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};
use crate::traces::TracePopulation;

use super::constants::{minimal_lambda, penalty_constants};
use super::objective::Problem;
use super::solve::optimize_thresholds;
use super::{PenaltyConfig, PenaltyWeights, DEFAULT_INIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    /// Below the feasibility floor; never used for lookups.
    Infeasible,
    /// Optimization returned a pair violating a constraint by more than the
    /// tolerance.
    Violation,
    Failed(String),
}

impl EntryStatus {
    pub fn label(&self) -> &str {
        match self {
            EntryStatus::Ok => "ok",
            EntryStatus::Infeasible => "infeasible",
            EntryStatus::Violation => "violation",
            EntryStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub snr_db: f64,
    /// Linear lower edge of the bin.
    pub snr: f64,
    pub thresholds: Option<ThresholdPair>,
    pub f_acc: f64,
    pub v_bits: f64,
    pub energy_j: f64,
    /// Mean local energy per event at the stored thresholds.
    pub e_loc: f64,
    /// Certified smoothness/convexity constants for this bin's channel.
    pub psi: f64,
    pub eta: f64,
    pub status: EntryStatus,
}

impl TableEntry {
    fn empty(snr_db: f64, status: EntryStatus) -> Self {
        TableEntry {
            snr_db,
            snr: db_to_linear(snr_db),
            thresholds: None,
            f_acc: f64::NAN,
            v_bits: f64::NAN,
            energy_j: f64::NAN,
            e_loc: f64::NAN,
            psi: f64::NAN,
            eta: f64::NAN,
            status,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status == EntryStatus::Ok && self.thresholds.is_some()
    }
}

/// Thresholds per SNR bin, for one bandwidth and constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub bandwidth: f64,
    /// Linear feasibility floor, or `None` when the budget cannot cover
    /// block-1 processing at all.
    pub floor: Option<f64>,
    /// Bins at or above the floor, ascending.
    pub entries: Vec<TableEntry>,
    /// Bins below the floor.
    pub infeasible: Vec<TableEntry>,
}

/// Result of looking up an SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup<'a> {
    pub entry: &'a TableEntry,
    /// The bin the SNR fell in was unusable and a lower bin was used.
    pub fallback: bool,
}

impl LookupTable {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry of the greatest bin edge not above `snr`, falling back to the
    /// nearest lower usable bin.
    pub fn lookup(&self, snr: f64) -> Option<Lookup<'_>> {
        let idx = self.entries.iter().rposition(|e| e.snr <= snr)?;
        let entry = self.entries[..=idx].iter().rev().find(|e| e.is_usable())?;
        Some(Lookup {
            entry,
            fallback: !self.entries[idx].is_usable(),
        })
    }

    /// All bins, infeasible ones included, in SNR order.
    pub fn rows(&self) -> Vec<&TableEntry> {
        let mut rows: Vec<&TableEntry> = self.entries.iter().chain(self.infeasible.iter()).collect();
        rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        rows
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["snr_db", "beta_low", "beta_up", "f_acc", "v_bits", "energy_j", "status"])?;
        let num = |x: f64| if x.is_finite() { format!("{x}") } else { String::new() };
        for e in self.rows() {
            let (bl, bu) = e.thresholds.map_or((f64::NAN, f64::NAN), |t| (t.beta_low, t.beta_up));
            wr.write_record([
                num(e.snr_db),
                num(bl),
                num(bu),
                num(e.f_acc),
                num(e.v_bits),
                num(e.energy_j),
                e.status.label().to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// `bins` evenly spaced SNR values in dB from `lo` to `hi` inclusive.
pub fn snr_grid_db(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    match bins {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..bins).map(|i| lo + (hi - lo) * i as f64 / (bins - 1) as f64).collect(),
    }
}

fn optimize_bin(
    pop: &TracePopulation,
    model: &EnergyModel,
    bandwidth: f64,
    constraints: &Constraints,
    cfg: &PenaltyConfig,
    snr_db: f64,
    init: ThresholdPair,
) -> TableEntry {
    let attempt = || -> Result<TableEntry> {
        let ch = ChannelState::from_db(snr_db, bandwidth)?;
        let problem = Problem::new(pop, model, ch, *constraints, cfg.slope)?;
        let (kappa, rho) = (cfg.initial_kappa(constraints), cfg.initial_rho(constraints));
        let min_lambda = minimal_lambda(pop.n_blocks(), model, &ch, constraints, cfg.slope, kappa, rho)?;
        let weights = PenaltyWeights {
            lambda: cfg.lambda.unwrap_or(cfg.lambda_margin * min_lambda),
            kappa,
            rho,
        };
        let k = penalty_constants(pop.n_blocks(), model, &ch, constraints, cfg.slope, &weights)?;
        let opt = optimize_thresholds(&problem, cfg, &init)?;
        let o = opt.outcome;
        let tol = 1.0 + cfg.convergence_tol;
        let ok = o.v <= constraints.data_volume_limit * tol && o.f_energy <= constraints.energy_limit * tol;
        Ok(TableEntry {
            snr_db,
            snr: ch.snr,
            thresholds: Some(opt.thresholds),
            f_acc: o.f_acc,
            v_bits: o.v,
            energy_j: o.f_energy,
            e_loc: o.e_loc,
            psi: k.psi,
            eta: k.eta,
            status: if ok { EntryStatus::Ok } else { EntryStatus::Violation },
        })
    };
    attempt().unwrap_or_else(|e| TableEntry::empty(snr_db, EntryStatus::Failed(e.to_string())))
}

/// Optimizes thresholds for every SNR bin (dB, ascending) at or above the
/// feasibility floor. With `warm_start` each bin starts from the previous
/// bin's solution; otherwise bins start from the default pair and run in
/// parallel. Per-bin failures are recorded, not fatal.
pub fn build_lookup_table(
    pop: &TracePopulation,
    model: &EnergyModel,
    bandwidth: f64,
    snr_grid_db: &[f64],
    constraints: &Constraints,
    cfg: &PenaltyConfig,
    warm_start: bool,
) -> Result<LookupTable> {
    if snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("SNR grid must be strictly increasing".into()));
    }
    cfg.validate()?;
    let floor = match feasibility_snr_floor(model, constraints, bandwidth) {
        Ok(f) => Some(f),
        Err(Error::InfeasibleBudget { .. }) => None,
        Err(e) => return Err(e),
    };
    let above = |db: f64| floor.is_some_and(|f| db_to_linear(db) >= f);
    let infeasible: Vec<TableEntry> = snr_grid_db
        .iter()
        .filter(|&&db| !above(db))
        .map(|&db| TableEntry::empty(db, EntryStatus::Infeasible))
        .collect();
    let feasible: Vec<f64> = snr_grid_db.iter().copied().filter(|&db| above(db)).collect();
    let default_init = ThresholdPair::from_array(DEFAULT_INIT);

    let entries = if warm_start {
        let mut out: Vec<TableEntry> = Vec::with_capacity(feasible.len());
        let mut init = default_init;
        for &db in &feasible {
            let e = optimize_bin(pop, model, bandwidth, constraints, cfg, db, init);
            if let Some(t) = e.thresholds {
                init = t;
            }
            out.push(e);
        }
        out
    } else {
        feasible
            .par_iter()
            .map(|&db| optimize_bin(pop, model, bandwidth, constraints, cfg, db, default_init))
            .collect()
    };
    if let Some(f) = floor {
        log::debug!("feasibility floor {:.3} dB", linear_to_db(f));
    }
    Ok(LookupTable {
        bandwidth,
        floor,
        entries,
        infeasible,
    })
}
