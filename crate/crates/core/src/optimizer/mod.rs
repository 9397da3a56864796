//! Threshold optimization: the proximal penalty objective, its constants,
//! accelerated inner solver, outer proximal-point loop, and the SNR-indexed
//! lookup table.

mod apg;
mod constants;
mod objective;
mod solve;
mod table;

pub use apg::{accelerated_gradient, ApgRun, ApgSettings, DIVERGENCE_PATIENCE};
pub use constants::{
    gamma_constant, lipschitz_bounds, minimal_lambda, penalty_constants, DerivedConstants, LipschitzBounds,
};
pub use objective::{penalty_value_and_grad, Evaluation, HardOutcome, Problem};
pub use solve::{
    optimize_thresholds, project, proximal_point, repair_hard_feasibility, solve_subproblem, OuterTrace,
    Optimized, BOX_EPS, BOX_GAP,
};
pub use table::{build_lookup_table, snr_grid_db, EntryStatus, Lookup, LookupTable, TableEntry};

use serde::{Deserialize, Serialize};

use crate::detector::DEFAULT_SLOPE;
use crate::energy::Constraints;

/// Weights of the proximal, volume and energy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub lambda: f64,
    pub kappa: f64,
    pub rho: f64,
}

/// How each outer step picks its proximal weight and the inner solver's
/// (psi, eta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Global constants from the population-independent bounds, lambda at
    /// `lambda_margin` times the minimal value. Provably strongly convex
    /// subproblems, but the bounds are loose enough that progress per outer
    /// step is tiny.
    Certified,
    /// Weak-convexity and smoothness read off a finite-difference Hessian
    /// at the current anchor; the inner solver backtracks on psi.
    LocalCurvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Fixed proximal weight for [`StepRule::Certified`]. `None` uses
    /// `lambda_margin * min_lambda`.
    pub lambda: Option<f64>,
    /// Initial volume-penalty weight; `None` means `100 / theta^2`.
    pub kappa: Option<f64>,
    /// Initial energy-penalty weight; `None` means `100 / xi^2`.
    pub rho: Option<f64>,
    pub slope: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub snr_bins: usize,
    /// Relative constraint violation tolerated before penalties double.
    pub convergence_tol: f64,
    pub step_rule: StepRule,
    pub lambda_margin: f64,
    pub max_escalations: usize,
    /// Outer loop stops once successive iterates move less than this.
    pub step_tol: f64,
    /// Additional starting points tried after the caller's initial pair.
    pub extra_starts: Vec<[f64; 2]>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda: None,
            kappa: None,
            rho: None,
            slope: DEFAULT_SLOPE,
            outer_iters: 60,
            inner_iters: 30,
            snr_bins: 16,
            convergence_tol: 0.01,
            step_rule: StepRule::LocalCurvature,
            lambda_margin: 1.5,
            max_escalations: 12,
            step_tol: 1e-6,
            extra_starts: vec![[0.5, 0.7], [0.5, 0.9], [0.2, 0.9], [0.7, 0.9], [0.1, 0.5]],
        }
    }
}

impl PenaltyConfig {
    pub fn initial_kappa(&self, c: &Constraints) -> f64 {
        self.kappa.unwrap_or(100.0 / (c.data_volume_limit * c.data_volume_limit))
    }

    pub fn initial_rho(&self, c: &Constraints) -> f64 {
        self.rho.unwrap_or(100.0 / (c.energy_limit * c.energy_limit))
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::InvalidArgument(m.to_string()));
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return bad("slope must be positive");
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return bad("iteration budgets must be positive");
        }
        if !(self.convergence_tol > 0.0) || !(self.lambda_margin > 1.0) || !(self.step_tol >= 0.0) {
            return bad("convergence_tol and step_tol must be positive, lambda_margin above 1");
        }
        for v in [self.lambda, self.kappa, self.rho].into_iter().flatten() {
            if !(v > 0.0) {
                return bad("penalty weights must be positive");
            }
        }
        Ok(())
    }
}

/// Default initial thresholds.
pub const DEFAULT_INIT: [f64; 2] = [0.3, 0.7];
