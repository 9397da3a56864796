//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's metric code; formulas are written out directly.
#![allow(dead_code)]

use dualexit::energy::{ChannelState, Constraints, EnergyModel};
use dualexit::traces::{generate_population, ConfidenceTrace, Label, SyntheticSpec, TracePopulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sig(y: f64, a: f64) -> f64 {
    1.0 / (1.0 + (-a * y).exp())
}

/// Exit masses straight from the product definitions.
pub fn naive_masses(s: &[f64], l: f64, u: f64, a: f64) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let mut tail = vec![0.0; n];
    let mut head = vec![0.0; n];
    for i in 0..n {
        let mut p = 1.0;
        for &c in &s[..i] {
            p *= sig(u - c, a) * sig(c - l, a);
        }
        tail[i] = sig(s[i] - u, a) * p;
        head[i] = if i + 1 == n { sig(u - s[i], a) } else { sig(l - s[i], a) } * p;
    }
    (tail, head)
}

/// Hard decision by direct scan: (is_tail, exit_block 1-based).
pub fn naive_hard(s: &[f64], l: f64, u: f64) -> (bool, usize) {
    for (i, &c) in s.iter().enumerate() {
        if c < l {
            return (false, i + 1);
        }
        if c > u {
            return (true, i + 1);
        }
    }
    (false, s.len())
}

/// Smoothed (f_acc, v, f_energy) computed from scratch.
pub fn naive_smooth(
    pop: &TracePopulation,
    x: [f64; 2],
    a: f64,
    model: &EnergyModel,
    e_off: f64,
    m_events: f64,
) -> (f64, f64, f64) {
    let eloc = cum_energy(model);
    let (mut acc, mut off, mut energy) = (0.0, 0.0, 0.0);
    let nt = pop.n_tail() as f64;
    for t in pop.traces() {
        let (tail, head) = naive_masses(t.scores(), x[0], x[1], a);
        let ts: f64 = tail.iter().sum();
        let hs: f64 = head.iter().sum();
        if t.is_tail() {
            off += ts;
            if t.server_correct {
                acc += ts;
            }
        } else {
            off += 1.0 - hs;
        }
        for i in 0..tail.len() {
            energy += (tail[i] + head[i]) * eloc[i];
        }
        energy += e_off * ts;
    }
    let n = pop.len() as f64;
    (acc / nt, model.payload_bits * m_events * off / n, m_events * energy / n)
}

pub struct HardEval {
    pub f_acc: f64,
    pub p_miss: f64,
    pub p_false: f64,
    pub p_off: f64,
    pub v: f64,
    pub energy: f64,
    pub feasible: bool,
}

pub fn cum_energy(model: &EnergyModel) -> Vec<f64> {
    let mut acc = 0.0;
    model
        .mem_ops
        .iter()
        .map(|&s| {
            acc += s as f64 * model.energy_per_access;
            acc
        })
        .collect()
}

pub fn naive_hard_eval(pop: &TracePopulation, l: f64, u: f64, model: &EnergyModel, e_off: f64, c: &Constraints) -> HardEval {
    let eloc = cum_energy(model);
    let (mut tail_hit, mut head_hit, mut credited, mut offl, mut local) = (0usize, 0usize, 0usize, 0usize, 0.0);
    for t in pop.traces() {
        let (tail, exit) = naive_hard(t.scores(), l, u);
        local += eloc[exit - 1];
        if tail {
            offl += 1;
        }
        match (t.label, tail) {
            (Label::Tail, true) => {
                tail_hit += 1;
                credited += usize::from(t.server_correct);
            }
            (Label::Head, false) => head_hit += 1,
            _ => {}
        }
    }
    let n = pop.len() as f64;
    let m = c.n_events as f64;
    let p_off = offl as f64 / n;
    let v = model.payload_bits * m * p_off;
    let energy = m * (local / n + e_off * p_off);
    HardEval {
        f_acc: credited as f64 / pop.n_tail() as f64,
        p_miss: 1.0 - tail_hit as f64 / pop.n_tail() as f64,
        p_false: 1.0 - head_hit as f64 / pop.n_head().max(1) as f64,
        p_off,
        v,
        energy,
        feasible: v <= c.data_volume_limit && energy <= c.energy_limit,
    }
}

/// Best hard-mode accuracy over an `n x n` grid of pairs with low < up,
/// restricted to pairs meeting both constraints.
pub fn grid_oracle(pop: &TracePopulation, model: &EnergyModel, e_off: f64, c: &Constraints, n: usize) -> Option<(f64, [f64; 2])> {
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 0..n {
        let l = (i as f64 + 0.5) / n as f64;
        for j in (i + 1)..n {
            let u = (j as f64 + 0.5) / n as f64;
            let e = naive_hard_eval(pop, l, u, model, e_off, c);
            if e.feasible && best.is_none_or(|b| e.f_acc > b.0) {
                best = Some((e.f_acc, [l, u]));
            }
        }
    }
    best
}

/// Random population with scores drawn uniformly, labels and server flags
/// at random (at least one tail and one head).
pub fn random_population(r: &mut ChaCha8Rng, m: usize, n: usize) -> TracePopulation {
    let traces = (0..m)
        .map(|i| {
            let label = match i {
                0 => Label::Tail,
                1 => Label::Head,
                _ if r.gen_bool(0.4) => Label::Tail,
                _ => Label::Head,
            };
            let scores = (0..n).map(|_| r.gen_range(0.01..0.99)).collect();
            ConfidenceTrace::new(scores, label, r.gen_bool(0.8)).unwrap()
        })
        .collect();
    TracePopulation::new(traces).unwrap()
}

/// Synthetic long-tailed population with the default score model.
pub fn synthetic(m: usize, n: usize, ratio: f64, seed: u64) -> TracePopulation {
    generate_population(&SyntheticSpec::new(m, n, ratio, seed)).unwrap()
}

/// Energy model with per-block costs rising from 1 mJ to 2 mJ, one-bit
/// payload and unit transmit power, plus a channel that makes each
/// offload cost `e_off` joules.
pub fn toy_energy(n: usize, e_off: f64) -> (EnergyModel, ChannelState) {
    let mem_ops = (0..n)
        .map(|i| {
            let f = if n == 1 { 1.0 } else { 1.0 + i as f64 / (n - 1) as f64 };
            (f * 1000.0).round() as u64
        })
        .collect();
    let model = EnergyModel::new(mem_ops, 1e-6, 1.0, 1.0).unwrap();
    // rate = B log2(1 + 1) = B
    let ch = ChannelState::new(1.0, 1.0 / e_off).unwrap();
    (model, ch)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
