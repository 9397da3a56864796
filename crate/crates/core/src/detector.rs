//! Dual-threshold sequential detection: hard decisions, logistic-smoothed
//! exit indicators, and population-level metrics with analytic gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{ChannelState, EnergyModel};
use crate::error::{Error, Result};
use crate::sum::Acc2;
use crate::traces::{ConfidenceTrace, Label, TracePopulation};

pub const DEFAULT_SLOPE: f64 = 50.0;

/// Populations at least this large are reduced in parallel chunks.
const PAR_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub beta_low: f64,
    pub beta_up: f64,
}

impl ThresholdPair {
    pub fn new(beta_low: f64, beta_up: f64) -> Result<Self> {
        if !(beta_low > 0.0 && beta_low < beta_up && beta_up < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "thresholds must satisfy 0 < low < up < 1, got ({beta_low}, {beta_up})"
            )));
        }
        Ok(ThresholdPair { beta_low, beta_up })
    }

    pub(crate) fn from_array(x: [f64; 2]) -> Self {
        ThresholdPair {
            beta_low: x[0],
            beta_up: x[1],
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.beta_low, self.beta_up]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Label,
    /// 1-based block index at which the event exits.
    pub exit_block: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Hard,
    Smooth { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub p_miss: f64,
    pub p_false: f64,
    pub p_off: f64,
    pub f_acc: f64,
    pub p_tail: f64,
    pub p_head: f64,
    /// Filled in by [`crate::energy::metrics_with_energy`].
    pub e_loc_mean: Option<f64>,
    pub e_off_mean: Option<f64>,
}

/// Logistic function with slope `alpha`.
pub fn logistic(y: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("slope {alpha} must be positive and finite")));
    }
    Ok(sigma(y, alpha))
}

#[inline]
pub(crate) fn sigma(y: f64, alpha: f64) -> f64 {
    let z = alpha * y;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn hard_classify(trace: &ConfidenceTrace, thr: &ThresholdPair) -> Decision {
    hard_exit(trace.scores(), thr.beta_low, thr.beta_up)
}

#[inline]
fn hard_exit(scores: &[f64], low: f64, up: f64) -> Decision {
    for (i, &c) in scores.iter().enumerate() {
        if c > up {
            return Decision { label: Label::Tail, exit_block: i + 1 };
        }
        if c < low {
            return Decision { label: Label::Head, exit_block: i + 1 };
        }
    }
    Decision {
        label: Label::Head,
        exit_block: scores.len(),
    }
}

fn check_block(trace: &ConfidenceTrace, n: usize) -> Result<()> {
    if n == 0 || n > trace.n_blocks() {
        return Err(Error::InvalidArgument(format!(
            "block {n} outside 1..={}",
            trace.n_blocks()
        )));
    }
    Ok(())
}

/// Product of the "continue" factors over blocks before `n` (1-based).
fn continue_product(scores: &[f64], thr: &ThresholdPair, alpha: f64, n: usize) -> f64 {
    scores[..n - 1]
        .iter()
        .map(|&c| sigma(thr.beta_up - c, alpha) * sigma(c - thr.beta_low, alpha))
        .product()
}

pub fn smooth_head_indicator(
    trace: &ConfidenceTrace,
    thr: &ThresholdPair,
    alpha: f64,
    n: usize,
) -> Result<f64> {
    check_block(trace, n)?;
    let s = trace.scores();
    let c = s[n - 1];
    let exit = if n == s.len() {
        sigma(thr.beta_up - c, alpha)
    } else {
        sigma(thr.beta_low - c, alpha)
    };
    Ok(exit * continue_product(s, thr, alpha, n))
}

pub fn smooth_tail_indicator(
    trace: &ConfidenceTrace,
    thr: &ThresholdPair,
    alpha: f64,
    n: usize,
) -> Result<f64> {
    check_block(trace, n)?;
    let s = trace.scores();
    Ok(sigma(s[n - 1] - thr.beta_up, alpha) * continue_product(s, thr, alpha, n))
}

/// Per-block exit masses of one trace, with gradients.
#[derive(Debug, Default)]
struct Masses {
    tail: Vec<f64>,
    head: Vec<f64>,
    dtail: Vec<[f64; 2]>,
    dhead: Vec<[f64; 2]>,
}

impl Masses {
    fn reset(&mut self, n: usize) {
        for v in [&mut self.tail, &mut self.head] {
            v.clear();
            v.resize(n, 0.0);
        }
        for v in [&mut self.dtail, &mut self.dhead] {
            v.clear();
            v.resize(n, [0.0; 2]);
        }
    }

    fn fill(&mut self, scores: &[f64], x: [f64; 2], mode: Mode, grad: bool) {
        let n_blocks = scores.len();
        self.reset(n_blocks);
        let [low, up] = x;
        let alpha = match mode {
            Mode::Hard => {
                let d = hard_exit(scores, low, up);
                match d.label {
                    Label::Tail => self.tail[d.exit_block - 1] = 1.0,
                    Label::Head => self.head[d.exit_block - 1] = 1.0,
                }
                return;
            }
            Mode::Smooth { alpha } => alpha,
        };
        let ds = |s: f64| alpha * s * (1.0 - s);
        let mut pre = 1.0;
        let mut dpre = [0.0f64; 2];
        for (i, &c) in scores.iter().enumerate() {
            let tf = sigma(c - up, alpha);
            let (hf, dhf) = if i + 1 == n_blocks {
                let h = sigma(up - c, alpha);
                (h, [0.0, ds(h)])
            } else {
                let h = sigma(low - c, alpha);
                (h, [ds(h), 0.0])
            };
            self.tail[i] = pre * tf;
            self.head[i] = pre * hf;
            if grad {
                let dtf = -ds(tf);
                self.dtail[i] = [dpre[0] * tf, dpre[1] * tf + pre * dtf];
                self.dhead[i] = [dpre[0] * hf + pre * dhf[0], dpre[1] * hf + pre * dhf[1]];
            }
            let su = sigma(up - c, alpha);
            let sl = sigma(c - low, alpha);
            let cont = su * sl;
            if grad {
                dpre = [dpre[0] * cont - pre * su * ds(sl), dpre[1] * cont + pre * ds(su) * sl];
            }
            pre *= cont;
        }
    }
}

/// Raw population sums from which every metric and energy expectation is
/// formed. Each carries its gradient with respect to (beta_low, beta_up).
#[derive(Debug, Clone, Default)]
pub(crate) struct ExitSums {
    /// Tail mass of tail events the server classifies correctly.
    pub correct: Acc2,
    /// Tail mass of tail events.
    pub tail_hits: Acc2,
    /// Head mass of head events.
    pub head_hits: Acc2,
    /// Tail mass over all events.
    pub offloads: Acc2,
    /// Exit mass weighted by cumulative local energy at the exit block.
    pub local: Acc2,
    pub n: usize,
    pub n_tail: usize,
}

impl ExitSums {
    fn merge(&mut self, o: &ExitSums) {
        self.correct.merge(&o.correct);
        self.tail_hits.merge(&o.tail_hits);
        self.head_hits.merge(&o.head_hits);
        self.offloads.merge(&o.offloads);
        self.local.merge(&o.local);
        self.n += o.n;
        self.n_tail += o.n_tail;
    }

    pub fn n_head(&self) -> usize {
        self.n - self.n_tail
    }

    fn accumulate(traces: &[ConfidenceTrace], x: [f64; 2], mode: Mode, eloc: &[f64], grad: bool) -> Self {
        let mut out = ExitSums::default();
        let mut m = Masses::default();
        for t in traces {
            m.fill(t.scores(), x, mode, grad);
            let (mut ts, mut hs, mut ls) = (0.0, 0.0, 0.0);
            let (mut dts, mut dhs, mut dls) = ([0.0; 2], [0.0; 2], [0.0; 2]);
            for i in 0..m.tail.len() {
                ts += m.tail[i];
                hs += m.head[i];
                let w = eloc.get(i).copied().unwrap_or(0.0);
                ls += w * (m.tail[i] + m.head[i]);
                for k in 0..2 {
                    dts[k] += m.dtail[i][k];
                    dhs[k] += m.dhead[i][k];
                    dls[k] += w * (m.dtail[i][k] + m.dhead[i][k]);
                }
            }
            out.n += 1;
            out.offloads.add(ts, dts);
            out.local.add(ls, dls);
            if t.is_tail() {
                out.n_tail += 1;
                out.tail_hits.add(ts, dts);
                if t.server_correct {
                    out.correct.add(ts, dts);
                }
            } else {
                out.head_hits.add(hs, dhs);
            }
        }
        out
    }

    pub fn compute(pop: &TracePopulation, x: [f64; 2], mode: Mode, eloc: &[f64], grad: bool) -> Self {
        let traces = pop.traces();
        if traces.len() < 2 * PAR_CHUNK {
            return Self::accumulate(traces, x, mode, eloc, grad);
        }
        let parts: Vec<ExitSums> = traces
            .par_chunks(PAR_CHUNK)
            .map(|c| Self::accumulate(c, x, mode, eloc, grad))
            .collect();
        let mut out = ExitSums::default();
        for p in &parts {
            out.merge(p);
        }
        out
    }

    /// Expected number of offloaded events, as used by the data-volume
    /// constraint: detected tails plus head events that were not cleared.
    pub fn offload_count(&self) -> (f64, [f64; 2]) {
        let th = self.tail_hits.value();
        let hh = self.head_hits.value();
        let [a0, a1] = self.tail_hits.grad();
        let [b0, b1] = self.head_hits.grad();
        (th + (self.n_head() as f64 - hh), [a0 - b0, a1 - b1])
    }

    pub fn metrics(&self) -> Result<DetectionMetrics> {
        if self.n_tail == 0 {
            return Err(Error::DegeneratePopulation("population has no tail events".into()));
        }
        let n = self.n as f64;
        let n_tail = self.n_tail as f64;
        let n_head = self.n_head() as f64;
        let p_false = if self.n_head() == 0 {
            0.0
        } else {
            1.0 - self.head_hits.value() / n_head
        };
        Ok(DetectionMetrics {
            p_miss: 1.0 - self.tail_hits.value() / n_tail,
            p_false,
            p_off: self.offload_count().0 / n,
            f_acc: self.correct.value() / n_tail,
            p_tail: n_tail / n,
            p_head: n_head / n,
            e_loc_mean: None,
            e_off_mean: None,
        })
    }
}

pub fn population_metrics(pop: &TracePopulation, thr: &ThresholdPair, mode: Mode) -> Result<DetectionMetrics> {
    ExitSums::compute(pop, thr.as_array(), mode, &[], false).metrics()
}

/// Which smooth quantity to differentiate.
#[derive(Debug, Clone, Copy)]
pub enum Quantity<'a> {
    FAcc,
    POff,
    /// Mean local energy per event.
    ELoc(&'a EnergyModel),
    /// Mean offload energy per event.
    EOff(&'a EnergyModel, &'a ChannelState),
}

/// Analytic gradient of a smooth metric with respect to (beta_low, beta_up).
pub fn metrics_gradient(
    pop: &TracePopulation,
    thr: &ThresholdPair,
    alpha: f64,
    q: Quantity<'_>,
) -> Result<[f64; 2]> {
    logistic(0.0, alpha)?;
    let mode = Mode::Smooth { alpha };
    let eloc = match q {
        Quantity::ELoc(model) => model.cumulative_profile(),
        _ => Vec::new(),
    };
    let s = ExitSums::compute(pop, thr.as_array(), mode, &eloc, true);
    let n = s.n as f64;
    let scale = |g: [f64; 2], k: f64| [g[0] * k, g[1] * k];
    Ok(match q {
        Quantity::FAcc => {
            if s.n_tail == 0 {
                return Err(Error::DegeneratePopulation("population has no tail events".into()));
            }
            scale(s.correct.grad(), 1.0 / s.n_tail as f64)
        }
        Quantity::POff => scale(s.offload_count().1, 1.0 / n),
        Quantity::ELoc(_) => scale(s.local.grad(), 1.0 / n),
        Quantity::EOff(model, ch) => {
            let e = crate::energy::offload_energy(model, ch)?;
            scale(s.offloads.grad(), e / n)
        }
    })
}
