//! Lipschitz, smoothness and strong-convexity constants of the penalized
//! subproblem.

use serde::{Deserialize, Serialize};

use crate::energy::{transmission_rate, ChannelState, Constraints, EnergyModel};
use crate::error::{Error, Result};

use super::PenaltyWeights;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Lipschitz constant of the gradient of the smoothed accuracy,
/// `k^2 N (N+1) (N + 4 sqrt3 - 1) / 24`.
pub fn gamma_constant(n_blocks: usize, slope: f64) -> f64 {
    let n = n_blocks as f64;
    slope * slope * n * (n + 1.0) * (n + 4.0 * 3f64.sqrt() - 1.0) / 24.0
}

/// Gradient-Lipschitz constants of f_acc, the data volume v, and the
/// interval energy f_energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub accuracy: f64,
    pub volume: f64,
    pub energy: f64,
}

/// Scalars shared by every constant: rate, `E_loc(N)` and `P_tr D / (2R)`.
struct Base {
    gamma: f64,
    d: f64,
    m: f64,
    n: f64,
    eloc_n: f64,
    half_off: f64,
    rate: f64,
}

fn base(n_blocks: usize, model: &EnergyModel, ch: &ChannelState, c: &Constraints, slope: f64) -> Result<Base> {
    let rate = transmission_rate(ch);
    if !(rate > 0.0) {
        return Err(Error::InfeasibleChannel { snr: ch.snr, floor: f64::NAN });
    }
    if n_blocks != model.n_blocks() {
        return Err(Error::InvalidArgument("block count mismatch between population and energy model".into()));
    }
    let d = model.payload_bits;
    Ok(Base {
        gamma: gamma_constant(n_blocks, slope),
        d,
        m: c.n_events as f64,
        n: n_blocks as f64,
        eloc_n: *model.cumulative_profile().last().unwrap(),
        half_off: model.tx_power * d / (2.0 * rate),
        rate,
    })
}

pub fn lipschitz_bounds(
    n_blocks: usize,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
    slope: f64,
) -> Result<LipschitzBounds> {
    let b = base(n_blocks, model, ch, c, slope)?;
    Ok(LipschitzBounds {
        accuracy: b.gamma,
        volume: 2.0 * b.d * b.m * b.gamma,
        energy: 2.0 * b.m * b.gamma * (b.eloc_n + b.half_off),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub a_const: f64,
    pub b_const: f64,
    pub psi: f64,
    pub eta: f64,
    /// Proximal weight these constants were computed for.
    pub lambda: f64,
    /// The proximal weight at which `eta` reaches zero.
    pub min_lambda: f64,
    pub rate: f64,
}

struct Ab {
    a: f64,
    b: f64,
}

fn ab(b: &Base, c: &Constraints, model: &EnergyModel) -> Ab {
    let a = c.data_volume_limit.max(b.d * b.m * (b.n - 1.0) / (2.0 * SQRT2));
    let b_rhs = (b.n * b.n + 1.0) * b.eloc_n / (2.0 * SQRT2)
        + (b.n + 2.0) * (b.n - 1.0) * model.tx_power * b.d / (4.0 * SQRT2 * b.rate);
    Ab {
        a,
        b: c.energy_limit.max(b_rhs),
    }
}

/// Lambda solving `eta = 0`.
fn min_lambda_of(b: &Base, k: &Ab, kappa: f64, rho: f64) -> f64 {
    b.gamma + 2.0 * b.m * b.gamma * (kappa * k.a * b.d + rho * k.b * (b.eloc_n + b.half_off))
}

pub fn minimal_lambda(
    n_blocks: usize,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
    slope: f64,
    kappa: f64,
    rho: f64,
) -> Result<f64> {
    let b = base(n_blocks, model, ch, c, slope)?;
    let k = ab(&b, c, model);
    Ok(min_lambda_of(&b, &k, kappa, rho))
}

/// Computes gamma, A, B, psi and eta for the given weights. Fails when
/// `weights.lambda` leaves `eta <= 0`.
pub fn penalty_constants(
    n_blocks: usize,
    model: &EnergyModel,
    ch: &ChannelState,
    c: &Constraints,
    slope: f64,
    weights: &PenaltyWeights,
) -> Result<DerivedConstants> {
    let b = base(n_blocks, model, ch, c, slope)?;
    let k = ab(&b, c, model);
    let PenaltyWeights { lambda, kappa, rho } = *weights;
    let g = b.gamma;
    let psi = g
        + lambda
        + kappa * b.d * b.m * k.a * (k.a + 2.0 * g)
        + rho * k.b * (k.b + 2.0 * b.m * g * (b.eloc_n + b.half_off));
    let min_lambda = min_lambda_of(&b, &k, kappa, rho);
    let eta = lambda - min_lambda;
    if !(eta > 0.0) {
        return Err(Error::LambdaTooSmall { lambda, min_lambda });
    }
    Ok(DerivedConstants {
        gamma: g,
        a_const: k.a,
        b_const: k.b,
        psi,
        eta,
        lambda,
        min_lambda,
        rate: b.rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma_constant(1, 1.0) - 3f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((gamma_constant(4, 1.0) - 8.2735).abs() < 1e-4);
        assert!((gamma_constant(3, 2.0) - 4.0 * gamma_constant(3, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn a_const_example() {
        let model = EnergyModel::new(vec![1; 4], 1e-6, 1.0, 1.0).unwrap();
        let ch = ChannelState::new(1.0, 1e6).unwrap();
        let c = Constraints::new(2.0, 1.0, 10).unwrap();
        let w = PenaltyWeights { lambda: 1e9, kappa: 1.0, rho: 1.0 };
        let k = penalty_constants(4, &model, &ch, &c, 1.0, &w).unwrap();
        assert!((k.a_const - 30.0 / (2.0 * SQRT2)).abs() < 1e-12);
        let c = Constraints::new(50.0, 1.0, 10).unwrap();
        assert_eq!(penalty_constants(4, &model, &ch, &c, 1.0, &w).unwrap().a_const, 50.0);
    }
}
