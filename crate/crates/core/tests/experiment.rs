mod common;

use std::process::Command;

use common::*;
use dualexit::detector::{population_metrics, Mode, ThresholdPair};
use dualexit::energy::{ChannelState, Constraints};
use dualexit::experiment::*;

fn quick(extra: &str) -> ExperimentConfig {
    let text = format!(
        "[traces]\nn_events = 200\nimbalance_ratio = 4.0\nseed = 5\n\n\
         [sweep]\nsimulate_intervals = 3\nbaseline_grid = 50\n{extra}"
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

#[test]
fn config_defaults_and_overrides() {
    let cfg = quick("axis = \"snr\"\ngrid = [0.0, 10.0]\n");
    assert_eq!(cfg.sweep.axis, SweepAxis::Snr);
    assert_eq!(cfg.traces.synthetic.n_events, 200);
    assert_eq!(cfg.energy.mem_ops.len(), 4);
    let c = cfg.constraints().unwrap();
    assert_eq!(c.data_volume_limit, 0.3 * 75_264.0 * 100.0);
    assert_eq!(cfg.penalty.slope, 50.0);
    assert_eq!("imbalance_ratio".parse::<SweepAxis>().unwrap(), SweepAxis::ImbalanceRatio);
    assert!("latency".parse::<SweepAxis>().is_err());
}

#[test]
fn config_errors() {
    for bad in [
        "",
        "[traces]\n[sweep]\ngrid = []\n",
        "[traces]\n[sweep]\ngrid = [0.3, 0.2]\n",
        "[traces]\n[energy]\nbogus = 1\n",
        "[traces]\n[sweep]\naxis = \"latency\"\n",
        "[traces]\nn_blocks = 3\n",
        "[traces]\npath = \"x.csv\"\n[sweep]\naxis = \"imbalance_ratio\"\ngrid = [2.0]\n",
    ] {
        assert!(ExperimentConfig::from_toml_str(bad).is_err(), "accepted: {bad:?}");
    }
}

#[test]
fn one_point_sweep_writes_one_row() {
    let mut cfg = quick("grid = [0.3]\n");
    let dir = tempfile::tempdir().unwrap();
    cfg.sweep.out = dir.path().to_path_buf();
    let res = run_sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 1);
    let files = res.save(dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("axis,value,status,beta_low,beta_up,f_acc,p_miss"));
    let row = &res.rows[0];
    assert_eq!(row.status, "ok");
    // reported metrics come straight from the detector
    let pop = cfg.population().unwrap();
    let thr = ThresholdPair::new(row.beta_low.unwrap(), row.beta_up.unwrap()).unwrap();
    let m = population_metrics(&pop, &thr, Mode::Hard).unwrap();
    assert_eq!(row.p_miss.unwrap(), m.p_miss);
    assert_eq!(row.p_off.unwrap(), m.p_off);
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = quick("axis = \"snr\"\ngrid = [-5.0, 5.0, 15.0]\nworkers = 3\n");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&cfg).unwrap().save(a.path()).unwrap();
    let mut one = cfg.clone();
    one.sweep.workers = 1;
    run_sweep(&one).unwrap().save(b.path()).unwrap();
    for f in ["sweep.csv", "constants.txt", "summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let res = run_sweep(&cfg).unwrap();
    assert!(res.rows.iter().all(|r| r.sim_f_acc.is_some()));
}

#[test]
fn every_axis_runs() {
    for extra in [
        "axis = \"energy_constraint\"\ngrid = [0.05, 1.0]\n",
        "axis = \"imbalance_ratio\"\ngrid = [2.0, 9.0]\n",
    ] {
        let res = run_sweep(&quick(extra)).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows[1].status, "ok");
    }
    // 0.05 J cannot cover block 1 for 100 events
    let res = run_sweep(&quick("axis = \"energy_constraint\"\ngrid = [0.05]\n")).unwrap();
    assert_eq!(res.rows[0].status, "infeasible");
}

#[test]
fn constants_report() {
    let mut cfg = quick("");
    cfg.penalty.slope = 1.0;
    let text = dump_constants(&cfg).unwrap();
    let gamma: f64 = value(&text, "gamma");
    assert!((gamma - 8.2735).abs() < 1e-4);

    // min_lambda solves eta = 0 for the reported A, B
    let row = text.lines().find(|l| l.starts_with("10,feasible")).unwrap();
    let f: Vec<f64> = row.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
    let (rate, a, b, min_lambda) = (f[0], f[1], f[2], f[3]);
    let c = cfg.constraints().unwrap();
    let model = cfg.energy_model().unwrap();
    let m = c.n_events as f64;
    let eloc_n = model.cumulative_local_energy(4).unwrap();
    let half_off = model.tx_power * model.payload_bits / (2.0 * rate);
    let (kappa, rho) = (value(&text, "kappa"), value(&text, "rho"));
    let want = gamma + 2.0 * m * gamma * (kappa * a * model.payload_bits + rho * b * (eloc_n + half_off));
    assert!(rel_err(min_lambda, want) < 1e-12);
    let eta = f[6];
    assert!(rel_err(eta, f[4] - min_lambda) < 1e-9);

    cfg.constraints.energy_limit = 0.01;
    cfg.sweep.axis = SweepAxis::Snr;
    cfg.sweep.grid = vec![0.0, 10.0, 20.0];
    let text = dump_constants(&cfg).unwrap();
    assert!(text.contains("feasibility_floor = none"));
    assert_eq!(text.lines().filter(|l| l.contains(",infeasible,")).count(), 3);
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn baselines_are_special_cases() {
    let pop = synthetic(300, 4, 4.0, 40);
    let (model, ch) = toy_energy(4, 2e-3);
    let c = Constraints::new(1e9, 1e9, 300).unwrap();
    let s = single_threshold(&pop, 0.8, &model, &ch, &c).unwrap();
    let want = naive_hard_eval(&pop, 0.2, 0.8, &model, 2e-3, &c);
    assert!(rel_err(s.p_miss, want.p_miss) < 1e-12 && rel_err(s.energy_j, want.energy) < 1e-12);
    assert!(single_threshold(&pop, 0.4, &model, &ch, &c).is_err());

    let t = terminal_threshold(&pop, 0.6, &model, &ch, &c).unwrap();
    let missed = pop.traces().iter().filter(|e| e.is_tail() && *e.scores().last().unwrap() <= 0.6).count();
    assert!(rel_err(t.p_miss, missed as f64 / pop.n_tail() as f64) < 1e-12);
    let full = model.cumulative_local_energy(4).unwrap();
    assert!(t.energy_j >= 300.0 * full);

    let tight = Constraints::new(0.1 * 300.0, 1e9, 300).unwrap();
    let best = best_single_threshold(&pop, &model, &ch, &tight, 100).unwrap().unwrap();
    assert!(best.feasible && best.v_bits <= tight.data_volume_limit);
    let ch0 = ChannelState::new(1.0, 500.0).unwrap();
    assert!(best_terminal_threshold(&pop, &model, &ch0, &tight, 50).unwrap().is_some());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualexit"))
}

#[test]
fn cli_runs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[traces]\nn_events = 150\n\n[sweep]\naxis = \"snr\"\ngrid = [0.3, 0.4]\nbaseline_grid = 20\nsimulate_intervals = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .args(["--config", cfg.to_str().unwrap(), "--sweep", "offload_constraint", "--out", out.to_str().unwrap()])
        .args(["--workers", "2", "--seed", "9"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("offload_constraint,0.3,"));
}

#[test]
fn cli_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[traces]\n[sweep]\ngrid = []\n").unwrap();
    let o = cli().args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "config");

    let o = cli().args(["--config", "/nonexistent.toml"]).output().unwrap();
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "io");
}
