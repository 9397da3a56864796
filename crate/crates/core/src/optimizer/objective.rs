use serde::{Deserialize, Serialize};

use crate::detector::{DetectionMetrics, ExitSums, Mode, ThresholdPair};
use crate::energy::{self, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};
use crate::traces::TracePopulation;

use super::PenaltyWeights;

/// Everything the objective depends on for one channel state.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub pop: &'a TracePopulation,
    pub model: &'a EnergyModel,
    pub channel: ChannelState,
    pub constraints: Constraints,
    pub slope: f64,
    eloc: Vec<f64>,
    e_off: f64,
}

/// Smooth-mode values of the accuracy and both constraint functions, with
/// gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub f_acc: f64,
    pub v: f64,
    pub f_energy: f64,
    pub grad_f_acc: [f64; 2],
    pub grad_v: [f64; 2],
    pub grad_f_energy: [f64; 2],
}

/// Hard-mode outcome of a threshold pair against the constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardOutcome {
    pub f_acc: f64,
    pub p_miss: f64,
    pub p_false: f64,
    pub p_off: f64,
    /// Bits per interval.
    pub v: f64,
    /// Joules per interval.
    pub f_energy: f64,
    /// Mean local energy per event.
    pub e_loc: f64,
    pub feasible: bool,
}

impl<'a> Problem<'a> {
    pub fn new(
        pop: &'a TracePopulation,
        model: &'a EnergyModel,
        channel: ChannelState,
        constraints: Constraints,
        slope: f64,
    ) -> Result<Self> {
        if pop.n_blocks() != model.n_blocks() {
            return Err(Error::InvalidArgument(format!(
                "population has {} blocks but energy model has {}",
                pop.n_blocks(),
                model.n_blocks()
            )));
        }
        if pop.n_tail() == 0 {
            return Err(Error::DegeneratePopulation("population has no tail events".into()));
        }
        crate::detector::logistic(0.0, slope)?;
        let e_off = energy::offload_energy(model, &channel)?;
        Ok(Problem {
            pop,
            model,
            channel,
            constraints,
            slope,
            eloc: model.cumulative_profile(),
            e_off,
        })
    }

    /// Same problem on another channel.
    pub fn with_channel(&self, channel: ChannelState) -> Result<Self> {
        Problem::new(self.pop, self.model, channel, self.constraints, self.slope)
    }

    pub fn offload_energy(&self) -> f64 {
        self.e_off
    }

    fn sums(&self, x: [f64; 2], mode: Mode, grad: bool) -> ExitSums {
        ExitSums::compute(self.pop, x, mode, &self.eloc, grad)
    }

    /// Smoothed f_acc, v = D M p_off and f_energy = M e_total.
    pub fn evaluate(&self, x: [f64; 2]) -> Evaluation {
        self.evaluate_with(x, true)
    }

    fn evaluate_with(&self, x: [f64; 2], grad: bool) -> Evaluation {
        let s = self.sums(x, Mode::Smooth { alpha: self.slope }, grad);
        let n = s.n as f64;
        let m = self.constraints.n_events as f64;
        let d = self.model.payload_bits;
        let acc = 1.0 / s.n_tail as f64;
        let (off, doff) = s.offload_count();
        let vs = d * m / n;
        let es = m / n;
        let [l0, l1] = s.local.grad();
        let [o0, o1] = s.offloads.grad();
        let [c0, c1] = s.correct.grad();
        Evaluation {
            f_acc: s.correct.value() * acc,
            v: off * vs,
            f_energy: (s.local.value() + self.e_off * s.offloads.value()) * es,
            grad_f_acc: [c0 * acc, c1 * acc],
            grad_v: [doff[0] * vs, doff[1] * vs],
            grad_f_energy: [(l0 + self.e_off * o0) * es, (l1 + self.e_off * o1) * es],
        }
    }

    /// Relative violation of the smoothed constraints (0 when feasible).
    pub fn smooth_violation(&self, x: [f64; 2]) -> f64 {
        let e = self.evaluate(x);
        let c = &self.constraints;
        (e.v / c.data_volume_limit - 1.0)
            .max(e.f_energy / c.energy_limit - 1.0)
            .max(0.0)
    }

    pub fn hard(&self, thr: &ThresholdPair) -> HardOutcome {
        let s = self.sums(thr.as_array(), Mode::Hard, false);
        let met: DetectionMetrics = s.metrics().expect("problem has tail events");
        let m = self.constraints.n_events as f64;
        let b = energy::breakdown(&s, self.e_off);
        let v = self.model.payload_bits * m * met.p_off;
        let f_energy = m * b.e_total;
        HardOutcome {
            f_acc: met.f_acc,
            p_miss: met.p_miss,
            p_false: met.p_false,
            p_off: met.p_off,
            v,
            f_energy,
            e_loc: b.e_loc,
            feasible: v <= self.constraints.data_volume_limit && f_energy <= self.constraints.energy_limit,
        }
    }

    /// Penalty terms without the proximal part: `-f_acc` plus quadratic
    /// hinges on constraint violation.
    pub(crate) fn penalized(&self, x: [f64; 2], kappa: f64, rho: f64, grad: bool) -> (f64, [f64; 2]) {
        let e = self.evaluate_with(x, grad);
        let c = &self.constraints;
        let hv = (e.v - c.data_volume_limit).max(0.0);
        let he = (e.f_energy - c.energy_limit).max(0.0);
        let value = -e.f_acc + 0.5 * kappa * hv * hv + 0.5 * rho * he * he;
        let g = |k: usize| -e.grad_f_acc[k] + kappa * hv * e.grad_v[k] + rho * he * e.grad_f_energy[k];
        (value, [g(0), g(1)])
    }
}

/// `f_t(x) = -f_acc(x) + lambda/2 |x - anchor|^2 + kappa/2 max(0, v - theta)^2
/// + rho/2 max(0, f_energy - xi)^2` and its gradient.
pub fn penalty_value_and_grad(
    thr: &ThresholdPair,
    anchor: &ThresholdPair,
    problem: &Problem<'_>,
    w: &PenaltyWeights,
) -> (f64, [f64; 2]) {
    prox_objective(problem, thr.as_array(), anchor.as_array(), w, true)
}

pub(crate) fn prox_objective(
    problem: &Problem<'_>,
    x: [f64; 2],
    anchor: [f64; 2],
    w: &PenaltyWeights,
    grad: bool,
) -> (f64, [f64; 2]) {
    let (v, g) = problem.penalized(x, w.kappa, w.rho, grad);
    let d = [x[0] - anchor[0], x[1] - anchor[1]];
    (
        v + 0.5 * w.lambda * (d[0] * d[0] + d[1] * d[1]),
        [g[0] + w.lambda * d[0], g[1] + w.lambda * d[1]],
    )
}
