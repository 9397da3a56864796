//! Sweep runner: optimizes thresholds along one axis, evaluates the
//! comparison schemes, and writes `sweep.csv`, `constants.txt` and
//! `summary.json`.

mod baselines;
mod config;

pub use baselines::{
    best_single_threshold, best_terminal_threshold, single_threshold, terminal_threshold, BaselineResult,
};
pub use config::{
    ChannelSection, ConstraintsSection, EnergySection, ExperimentConfig, SweepAxis, SweepSection, TracesSection,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::ThresholdPair;
use crate::energy::{db_to_linear, feasibility_snr_floor, linear_to_db, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};
use crate::optimizer::{
    build_lookup_table, gamma_constant, minimal_lambda, optimize_thresholds, penalty_constants, LookupTable,
    PenaltyWeights, Problem, DEFAULT_INIT,
};
use crate::policy::run_campaign;
use crate::traces::{generate_population, TracePopulation};

/// One grid point of a sweep. Missing values are `None` (empty in CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub status: String,
    pub beta_low: Option<f64>,
    pub beta_up: Option<f64>,
    pub f_acc: Option<f64>,
    pub p_miss: Option<f64>,
    pub p_false: Option<f64>,
    pub p_off: Option<f64>,
    pub v_bits: Option<f64>,
    pub energy_j: Option<f64>,
    pub feasible: Option<bool>,
    pub single_tau: Option<f64>,
    pub single_f_acc: Option<f64>,
    pub single_p_miss: Option<f64>,
    pub terminal_tau: Option<f64>,
    pub terminal_f_acc: Option<f64>,
    pub terminal_p_miss: Option<f64>,
    pub sim_f_acc: Option<f64>,
    pub sim_p_miss: Option<f64>,
    pub sim_p_off: Option<f64>,
    pub sim_energy_j: Option<f64>,
}

impl SweepRow {
    fn new(axis: SweepAxis, value: f64) -> Self {
        SweepRow {
            axis: axis.as_str().to_string(),
            value,
            status: String::new(),
            beta_low: None,
            beta_up: None,
            f_acc: None,
            p_miss: None,
            p_false: None,
            p_off: None,
            v_bits: None,
            energy_j: None,
            feasible: None,
            single_tau: None,
            single_f_acc: None,
            single_p_miss: None,
            terminal_tau: None,
            terminal_f_acc: None,
            terminal_p_miss: None,
            sim_f_acc: None,
            sim_p_miss: None,
            sim_p_off: None,
            sim_energy_j: None,
        }
    }

    fn set_baselines(&mut self, single: Option<BaselineResult>, terminal: Option<BaselineResult>) {
        if let Some(s) = single {
            self.single_tau = Some(s.tau);
            self.single_f_acc = Some(s.f_acc);
            self.single_p_miss = Some(s.p_miss);
        }
        if let Some(t) = terminal {
            self.terminal_tau = Some(t.tau);
            self.terminal_f_acc = Some(t.f_acc);
            self.terminal_p_miss = Some(t.p_miss);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub constants: String,
    /// Feasibility floor at the base configuration, in dB.
    pub floor_db: Option<f64>,
}

/// Everything one grid point needs, resolved from the config.
struct PointSetup {
    pop: TracePopulation,
    constraints: Constraints,
    channel: ChannelState,
}

fn is_infeasible(e: &Error) -> bool {
    matches!(e, Error::InfeasibleChannel { .. } | Error::InfeasibleBudget { .. })
}

fn point_setup(cfg: &ExperimentConfig, base_pop: &TracePopulation, value: f64) -> Result<PointSetup> {
    let mut constraints = cfg.constraints()?;
    let mut snr_db = cfg.channel.snr_db;
    let mut pop = None;
    match cfg.sweep.axis {
        SweepAxis::OffloadConstraint => {
            constraints.data_volume_limit = value * cfg.energy.payload_bits * constraints.n_events as f64;
        }
        SweepAxis::EnergyConstraint => constraints.energy_limit = value,
        SweepAxis::Snr => snr_db = value,
        SweepAxis::ImbalanceRatio => {
            let mut spec = cfg.traces.synthetic.clone();
            spec.imbalance_ratio = value;
            pop = Some(generate_population(&spec)?);
        }
    }
    let constraints = Constraints::new(constraints.data_volume_limit, constraints.energy_limit, constraints.n_events)?;
    Ok(PointSetup {
        pop: pop.unwrap_or_else(|| base_pop.clone()),
        constraints,
        channel: ChannelState::from_db(snr_db, cfg.channel.bandwidth)?,
    })
}

fn run_point(cfg: &ExperimentConfig, model: &EnergyModel, base_pop: &TracePopulation, value: f64) -> Result<SweepRow> {
    let mut row = SweepRow::new(cfg.sweep.axis, value);
    let s = point_setup(cfg, base_pop, value)?;
    fill_baselines(cfg, model, &s, &mut row)?;
    let problem = Problem::new(&s.pop, model, s.channel, s.constraints, cfg.penalty.slope)?;
    match optimize_thresholds(&problem, &cfg.penalty, &ThresholdPair::from_array(DEFAULT_INIT)) {
        Ok(opt) => {
            let o = opt.outcome;
            row.status = if o.feasible { "ok" } else { "violation" }.into();
            row.beta_low = Some(opt.thresholds.beta_low);
            row.beta_up = Some(opt.thresholds.beta_up);
            row.f_acc = Some(o.f_acc);
            row.p_miss = Some(o.p_miss);
            row.p_false = Some(o.p_false);
            row.p_off = Some(o.p_off);
            row.v_bits = Some(o.v);
            row.energy_j = Some(o.f_energy);
            row.feasible = Some(o.feasible);
        }
        Err(e) if is_infeasible(&e) => row.status = "infeasible".into(),
        Err(e) => return Err(e),
    }
    Ok(row)
}

fn fill_baselines(cfg: &ExperimentConfig, model: &EnergyModel, s: &PointSetup, row: &mut SweepRow) -> Result<()> {
    if s.channel.snr <= 0.0 {
        return Ok(());
    }
    let n = cfg.sweep.baseline_grid;
    let single = best_single_threshold(&s.pop, model, &s.channel, &s.constraints, n)?;
    let terminal = best_terminal_threshold(&s.pop, model, &s.channel, &s.constraints, n)?;
    row.set_baselines(single, terminal);
    Ok(())
}

fn run_snr_axis(cfg: &ExperimentConfig, model: &EnergyModel, pop: &TracePopulation) -> Result<Vec<SweepRow>> {
    let constraints = cfg.constraints()?;
    let table = build_lookup_table(
        pop,
        model,
        cfg.channel.bandwidth,
        &cfg.sweep.grid,
        &constraints,
        &cfg.penalty,
        true,
    )?;
    cfg.sweep
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &db)| snr_row(cfg, model, pop, &table, &constraints, i, db))
        .collect()
}

fn snr_row(
    cfg: &ExperimentConfig,
    model: &EnergyModel,
    pop: &TracePopulation,
    table: &LookupTable,
    constraints: &Constraints,
    index: usize,
    db: f64,
) -> Result<SweepRow> {
    let mut row = SweepRow::new(SweepAxis::Snr, db);
    let setup = PointSetup {
        pop: pop.clone(),
        constraints: *constraints,
        channel: ChannelState::from_db(db, cfg.channel.bandwidth)?,
    };
    fill_baselines(cfg, model, &setup, &mut row)?;
    match table.entries.iter().find(|e| e.snr_db == db) {
        Some(e) => {
            row.status = e.status.label().to_string();
            if let Some(t) = e.thresholds {
                let problem = Problem::new(pop, model, setup.channel, *constraints, cfg.penalty.slope)?;
                let o = problem.hard(&t);
                row.beta_low = Some(t.beta_low);
                row.beta_up = Some(t.beta_up);
                row.f_acc = Some(o.f_acc);
                row.p_miss = Some(o.p_miss);
                row.p_false = Some(o.p_false);
                row.p_off = Some(o.p_off);
                row.v_bits = Some(o.v);
                row.energy_j = Some(o.f_energy);
                row.feasible = Some(o.feasible);
            }
        }
        None => row.status = "infeasible".into(),
    }
    if cfg.sweep.simulate_intervals > 0 && constraints.n_events <= pop.len() {
        let snrs = vec![db_to_linear(db); cfg.sweep.simulate_intervals];
        let seed = cfg.sweep.seed.wrapping_add(index as u64);
        let rep = run_campaign(&snrs, pop, table, model, constraints, seed)?;
        row.sim_f_acc = Some(rep.aggregate.f_acc);
        row.sim_p_miss = Some(rep.aggregate.p_miss);
        row.sim_p_off = Some(rep.aggregate.p_off);
        row.sim_energy_j = Some(rep.aggregate.energy_j / rep.aggregate.n_intervals as f64);
    }
    Ok(row)
}

/// Runs every grid point (concurrently, up to `sweep.workers` threads) and
/// returns rows in grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let model = cfg.energy_model()?;
    let pop = cfg.population()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| -> Result<Vec<SweepRow>> {
        match cfg.sweep.axis {
            SweepAxis::Snr => run_snr_axis(cfg, &model, &pop),
            _ => cfg.sweep.grid.par_iter().map(|&v| run_point(cfg, &model, &pop, v)).collect(),
        }
    })?;
    let floor_db = cfg
        .constraints()
        .and_then(|c| feasibility_snr_floor(&model, &c, cfg.channel.bandwidth))
        .ok()
        .map(linear_to_db);
    Ok(SweepResult {
        axis: cfg.sweep.axis,
        rows,
        constants: dump_constants(cfg)?,
        floor_db,
    })
}

/// Text report of every derived constant, plus the feasibility floor and
/// the certified (psi, eta) for each SNR considered.
pub fn dump_constants(cfg: &ExperimentConfig) -> Result<String> {
    let model = cfg.energy_model()?;
    let c = cfg.constraints()?;
    let n_blocks = model.n_blocks();
    let p = &cfg.penalty;
    let (kappa, rho) = (p.initial_kappa(&c), p.initial_rho(&c));
    let snrs: Vec<f64> = match cfg.sweep.axis {
        SweepAxis::Snr => cfg.sweep.grid.clone(),
        _ => vec![cfg.channel.snr_db],
    };
    let floor = feasibility_snr_floor(&model, &c, cfg.channel.bandwidth);

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "n_blocks = {n_blocks}");
    let _ = writeln!(w, "slope = {}", p.slope);
    let _ = writeln!(w, "n_events = {}", c.n_events);
    let _ = writeln!(w, "data_volume_limit_bits = {}", c.data_volume_limit);
    let _ = writeln!(w, "energy_limit_j = {}", c.energy_limit);
    let _ = writeln!(w, "kappa = {kappa}");
    let _ = writeln!(w, "rho = {rho}");
    let _ = writeln!(w, "gamma = {}", gamma_constant(n_blocks, p.slope));
    match &floor {
        Ok(f) => {
            let _ = writeln!(w, "feasibility_floor = {f}");
            let _ = writeln!(w, "feasibility_floor_db = {}", linear_to_db(*f));
        }
        Err(e) => {
            let _ = writeln!(w, "feasibility_floor = none ({e})");
        }
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "snr_db,feasible,rate_bps,a_const,b_const,min_lambda,lambda,psi,eta");
    for &db in &snrs {
        let ch = ChannelState::from_db(db, cfg.channel.bandwidth)?;
        let feasible = matches!(&floor, Ok(f) if ch.snr >= *f);
        if !feasible {
            let _ = writeln!(w, "{db},infeasible,,,,,,,");
            continue;
        }
        let min_lambda = minimal_lambda(n_blocks, &model, &ch, &c, p.slope, kappa, rho)?;
        let lambda = p.lambda.unwrap_or(p.lambda_margin * min_lambda);
        let row = match penalty_constants(n_blocks, &model, &ch, &c, p.slope, &PenaltyWeights { lambda, kappa, rho }) {
            Ok(k) => format!(
                "{db},feasible,{},{},{},{},{},{},{}",
                k.rate, k.a_const, k.b_const, k.min_lambda, k.lambda, k.psi, k.eta
            ),
            Err(Error::LambdaTooSmall { min_lambda, .. }) => {
                format!("{db},lambda_too_small,,,,{min_lambda},{lambda},,")
            }
            Err(e) => return Err(e),
        };
        let _ = writeln!(w, "{row}");
    }
    Ok(out)
}

impl SweepResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            axis: &'a str,
            points: usize,
            feasible_points: usize,
            floor_db: Option<f64>,
            rows: &'a [SweepRow],
        }
        let s = Summary {
            axis: self.axis.as_str(),
            points: self.rows.len(),
            feasible_points: self.rows.iter().filter(|r| r.feasible == Some(true)).count(),
            floor_db: self.floor_db,
            rows: &self.rows,
        };
        serde_json::to_string_pretty(&s).expect("summary serializes")
    }

    /// Writes `sweep.csv`, `constants.txt` and `summary.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("sweep.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let constants = dir.join("constants.txt");
        std::fs::write(&constants, &self.constants).map_err(|e| Error::io(&constants, e))?;
        let summary = dir.join("summary.json");
        std::fs::write(&summary, self.summary_json()).map_err(|e| Error::io(&summary, e))?;
        Ok(vec![csv_path, constants, summary])
    }
}
