use serde::{Deserialize, Serialize};

use crate::detector::ThresholdPair;
use crate::energy::feasibility_snr_floor;
use crate::error::{Error, Result};

use super::apg::{accelerated_gradient, ApgSettings};
use super::constants::{minimal_lambda, penalty_constants};
use super::objective::{prox_objective, HardOutcome, Problem};
use super::{PenaltyConfig, PenaltyWeights, StepRule};

/// Minimum distance of either threshold from 0 or 1.
pub const BOX_EPS: f64 = 1e-4;
/// Minimum gap between the two thresholds.
pub const BOX_GAP: f64 = 1e-3;

/// Finite-difference step for the local Hessian estimate.
const HESSIAN_STEP: f64 = 1e-5;

/// Nearest point with `eps <= low <= up - gap <= 1 - eps - gap`.
pub fn project(x: [f64; 2]) -> [f64; 2] {
    let low = x[0].clamp(BOX_EPS, 1.0 - BOX_EPS - BOX_GAP);
    let up = x[1].clamp(low + BOX_GAP, 1.0 - BOX_EPS);
    [low, up]
}

/// Runs the accelerated solver on one proximal subproblem anchored at
/// `anchor`, starting from `start`, and returns the last iterate.
pub fn solve_subproblem(
    anchor: &ThresholdPair,
    start: &ThresholdPair,
    problem: &Problem<'_>,
    weights: &PenaltyWeights,
    settings: ApgSettings,
) -> Result<ThresholdPair> {
    let a = anchor.as_array();
    let run = accelerated_gradient(
        |x, g| prox_objective(problem, x, a, weights, g),
        project,
        start.as_array(),
        settings,
    )?;
    Ok(ThresholdPair::from_array(run.x))
}

/// Outer-loop history of one proximal-point run, across penalty escalations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OuterTrace {
    /// Anchors, starting with the projected initial point.
    pub iterates: Vec<ThresholdPair>,
    /// `|x_{t+1} - x_t|` for each outer step.
    pub steps: Vec<f64>,
    /// Proximal weight used at each outer step.
    pub lambdas: Vec<f64>,
    /// Number of times the penalty weights were doubled.
    pub escalations: usize,
    pub kappa: f64,
    pub rho: f64,
}

fn sym_eigs(h: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// (lambda, psi, eta) from the curvature of the penalized objective at `x`.
fn local_constants(problem: &Problem<'_>, x: [f64; 2], kappa: f64, rho: f64) -> (f64, f64, f64) {
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += HESSIAN_STEP;
        xm[i] -= HESSIAN_STEP;
        let gp = problem.penalized(xp, kappa, rho, true).1;
        let gm = problem.penalized(xm, kappa, rho, true).1;
        for j in 0..2 {
            h[j][i] = (gp[j] - gm[j]) / (2.0 * HESSIAN_STEP);
        }
    }
    let off = 0.5 * (h[0][1] + h[1][0]);
    let (lo, hi) = sym_eigs([[h[0][0], off], [off, h[1][1]]]);
    let weak = (-lo).max(0.0);
    let smooth = lo.abs().max(hi.abs()).max(1e-3);
    let lambda = (1.5 * weak).max(0.1 * smooth);
    (lambda, lambda + smooth, lambda - weak)
}

/// Algorithm-style proximal-point loop from `init`: `outer_iters` anchored
/// subproblems per round, rounds repeated with doubled penalty weights while
/// the smoothed constraints are violated by more than `convergence_tol`.
/// Each round returns the iterate with the smallest successive difference,
/// earliest on ties.
pub fn proximal_point(
    problem: &Problem<'_>,
    cfg: &PenaltyConfig,
    init: &ThresholdPair,
) -> Result<(ThresholdPair, OuterTrace)> {
    cfg.validate()?;
    let c = &problem.constraints;
    let mut kappa = cfg.initial_kappa(c);
    let mut rho = cfg.initial_rho(c);
    let mut x = project(init.as_array());
    let mut trace = OuterTrace {
        iterates: vec![ThresholdPair::from_array(x)],
        ..Default::default()
    };
    let n_blocks = problem.pop.n_blocks();

    for round in 0..=cfg.max_escalations {
        trace.escalations = round;
        let certified = match cfg.step_rule {
            StepRule::Certified => {
                let lambda = match cfg.lambda {
                    Some(l) => l,
                    None => {
                        cfg.lambda_margin
                            * minimal_lambda(
                                n_blocks,
                                problem.model,
                                &problem.channel,
                                c,
                                cfg.slope,
                                kappa,
                                rho,
                            )?
                    }
                };
                let w = PenaltyWeights { lambda, kappa, rho };
                Some(penalty_constants(n_blocks, problem.model, &problem.channel, c, cfg.slope, &w)?)
            }
            StepRule::LocalCurvature => None,
        };

        let mut best: Option<(f64, [f64; 2])> = None;
        for _ in 0..cfg.outer_iters {
            let (lambda, settings) = match &certified {
                Some(k) => (
                    k.lambda,
                    ApgSettings { psi: k.psi, eta: k.eta, iters: cfg.inner_iters, backtrack: false, tol: 0.0 },
                ),
                None => {
                    let (lambda, psi, eta) = local_constants(problem, x, kappa, rho);
                    (lambda, ApgSettings { psi, eta, iters: cfg.inner_iters, backtrack: true, tol: 1e-12 })
                }
            };
            let w = PenaltyWeights { lambda, kappa, rho };
            let anchor = ThresholdPair::from_array(x);
            let mut xn = solve_subproblem(&anchor, &anchor, problem, &w, settings)?.as_array();
            // keep outer iterates monotone in the anchored objective
            if prox_objective(problem, xn, x, &w, false).0 > prox_objective(problem, x, x, &w, false).0 {
                xn = x;
            }
            let step = ((xn[0] - x[0]).powi(2) + (xn[1] - x[1]).powi(2)).sqrt();
            trace.steps.push(step);
            trace.lambdas.push(lambda);
            trace.iterates.push(ThresholdPair::from_array(xn));
            if best.is_none_or(|(s, _)| step < s) {
                best = Some((step, xn));
            }
            x = xn;
            if step < cfg.step_tol {
                break;
            }
        }
        x = best.map(|b| b.1).unwrap_or(x);
        trace.kappa = kappa;
        trace.rho = rho;
        if problem.smooth_violation(x) <= cfg.convergence_tol {
            break;
        }
        kappa *= 2.0;
        rho *= 2.0;
    }
    Ok((ThresholdPair::from_array(x), trace))
}

/// Nudges a pair that violates a hard-mode constraint back into the feasible
/// set. Raising either threshold can only shrink the set of events detected
/// as tail, and raising the lower one can only move exits earlier, so the
/// first feasible point along each direction is the least damaging move.
/// Returns the better of the two, or `None` if neither direction helps.
pub fn repair_hard_feasibility(problem: &Problem<'_>, thr: &ThresholdPair) -> Option<(ThresholdPair, HardOutcome)> {
    let start = problem.hard(thr);
    if start.feasible {
        return Some((*thr, start));
    }
    let scores = problem.pop.distinct_scores();
    let [low, up] = thr.as_array();
    let mut found: Vec<(ThresholdPair, HardOutcome)> = Vec::new();

    for &c in scores.iter().filter(|&&c| c > up) {
        let cand = ThresholdPair::from_array(project([low, c.min(1.0 - BOX_EPS)]));
        let out = problem.hard(&cand);
        if out.feasible {
            found.push((cand, out));
            break;
        }
        if c >= 1.0 - BOX_EPS {
            break;
        }
    }
    for &c in scores.iter().filter(|&&c| c >= low) {
        let bl = c.next_up();
        if bl > 1.0 - BOX_EPS - BOX_GAP {
            break;
        }
        let cand = ThresholdPair::from_array(project([bl, up.max(bl + BOX_GAP)]));
        let out = problem.hard(&cand);
        if out.feasible {
            found.push((cand, out));
            break;
        }
    }
    found.into_iter().fold(None, |acc, c| match acc {
        Some(a) if a.1.f_acc >= c.1.f_acc => Some(a),
        _ => Some(c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub thresholds: ThresholdPair,
    /// Hard-mode performance of `thresholds`.
    pub outcome: HardOutcome,
    /// Outer history of the run that produced `thresholds` (empty when the
    /// initial pair itself was kept).
    pub trace: OuterTrace,
    /// Starting point of that run.
    pub start: ThresholdPair,
    /// Whether hard-feasibility repair moved the run's output.
    pub repaired: bool,
}

/// Maximizes hard-mode accuracy subject to both constraints.
///
/// The proximal-point loop runs from `init` and from each of
/// `cfg.extra_starts`; outputs that violate a hard-mode constraint go
/// through [`repair_hard_feasibility`]. The initial pair is also a
/// candidate. Feasible candidates beat infeasible ones, then higher
/// accuracy wins, then the earlier candidate.
pub fn optimize_thresholds(problem: &Problem<'_>, cfg: &PenaltyConfig, init: &ThresholdPair) -> Result<Optimized> {
    let floor = feasibility_snr_floor(problem.model, &problem.constraints, problem.channel.bandwidth)?;
    if problem.channel.snr < floor {
        return Err(Error::InfeasibleChannel { snr: problem.channel.snr, floor });
    }
    let init_p = ThresholdPair::from_array(project(init.as_array()));
    let mut best = Optimized {
        thresholds: init_p,
        outcome: problem.hard(&init_p),
        trace: OuterTrace::default(),
        start: init_p,
        repaired: false,
    };
    let better = |a: &HardOutcome, b: &HardOutcome| (a.feasible, a.f_acc) > (b.feasible, b.f_acc);

    let starts = std::iter::once(init_p.as_array()).chain(cfg.extra_starts.iter().copied());
    for (i, s) in starts.enumerate() {
        let start = ThresholdPair::from_array(project(s));
        let (thr, trace) = match proximal_point(problem, cfg, &start) {
            Ok(r) => r,
            Err(e) if i == 0 => return Err(e),
            Err(e) => {
                log::debug!("start {s:?} abandoned: {e}");
                continue;
            }
        };
        let (thr, outcome, repaired) = match repair_hard_feasibility(problem, &thr) {
            Some((t, o)) => (t, o, t != thr),
            None => (thr, problem.hard(&thr), false),
        };
        if better(&outcome, &best.outcome) {
            best = Optimized { thresholds: thr, outcome, trace, start, repaired };
        }
    }
    Ok(best)
}
