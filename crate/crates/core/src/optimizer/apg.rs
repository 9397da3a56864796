use crate::detector::ThresholdPair;
use crate::error::{Error, Result};

/// Consecutive objective increases tolerated before giving up.
pub const DIVERGENCE_PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApgSettings {
    pub psi: f64,
    pub eta: f64,
    pub iters: usize,
    /// Double psi until the quadratic upper model holds at each step.
    pub backtrack: bool,
    /// Stop early once an iteration moves less than this. Zero runs every
    /// iteration.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgRun {
    pub x: [f64; 2],
    /// Objective at x_0, x_1, ..., x_iters.
    pub values: Vec<f64>,
    pub iterates: Vec<[f64; 2]>,
    /// Smoothness estimate in force at the end.
    pub psi: f64,
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Nesterov's constant-momentum method for an eta-strongly convex,
/// psi-smooth objective: projected gradient step of length 1/psi, then
/// extrapolation with momentum (sqrt psi - sqrt eta)/(sqrt psi + sqrt eta).
///
/// `f(x, need_grad)` returns the objective and, when asked, its gradient.
pub fn accelerated_gradient<F, P>(mut f: F, project: P, x0: [f64; 2], s: ApgSettings) -> Result<ApgRun>
where
    F: FnMut([f64; 2], bool) -> (f64, [f64; 2]),
    P: Fn([f64; 2]) -> [f64; 2],
{
    if !(s.psi > 0.0 && s.eta > 0.0 && s.eta <= s.psi) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < eta <= psi, got eta {} psi {}",
            s.eta, s.psi
        )));
    }
    let mut psi = s.psi;
    let mut x = project(x0);
    let mut y = x;
    let mut values = vec![f(x, false).0];
    let mut iterates = vec![x];
    let mut rises = 0;
    for _ in 0..s.iters {
        let (fy, gy) = f(y, true);
        let (xn, fx) = loop {
            let xn = project([y[0] - gy[0] / psi, y[1] - gy[1] / psi]);
            let fx = f(xn, false).0;
            if !s.backtrack {
                break (xn, fx);
            }
            let d = [xn[0] - y[0], xn[1] - y[1]];
            if fx <= fy + dot(gy, d) + 0.5 * psi * dot(d, d) + 1e-12 * fy.abs().max(1.0) || psi > 1e300 {
                break (xn, fx);
            }
            psi *= 2.0;
        };
        if !fx.is_finite() {
            return Err(failure("objective became non-finite", &iterates));
        }
        let last = *values.last().unwrap();
        let rose = fx > last + 1e-12 * last.abs().max(1.0);
        let (sp, se) = (psi.sqrt(), s.eta.min(psi).sqrt());
        // with backtracking the constants are estimates; drop momentum after a rise
        let mom = if rose && s.backtrack { 0.0 } else { (sp - se) / (sp + se) };
        y = project([xn[0] + mom * (xn[0] - x[0]), xn[1] + mom * (xn[1] - x[1])]);
        let moved = ((xn[0] - x[0]).powi(2) + (xn[1] - x[1]).powi(2)).sqrt();
        x = xn;
        rises = if rose { rises + 1 } else { 0 };
        values.push(fx);
        iterates.push(x);
        if rises >= DIVERGENCE_PATIENCE {
            return Err(failure("objective rose for too many consecutive iterations", &iterates));
        }
        if moved < s.tol && rises == 0 {
            break;
        }
    }
    Ok(ApgRun { x, values, iterates, psi })
}

fn failure(reason: &str, iterates: &[[f64; 2]]) -> Error {
    Error::NumericalFailure {
        reason: reason.into(),
        history: iterates.iter().map(|&x| ThresholdPair::from_array(x)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_quadratic() {
        let (a, b) = (1.0, 40.0);
        let f = |x: [f64; 2], _| (0.5 * (a * x[0] * x[0] + b * x[1] * x[1]), [a * x[0], b * x[1]]);
        let s = ApgSettings { psi: b, eta: a, iters: 150, backtrack: false, tol: 0.0 };
        let r = accelerated_gradient(f, |x| x, [3.0, -2.0], s).unwrap();
        assert!(r.x[0].abs() < 1e-8 && r.x[1].abs() < 1e-8);
    }

    #[test]
    fn diverges_with_bad_step() {
        let f = |x: [f64; 2], _| (0.5 * (x[0] * x[0] + x[1] * x[1]), x);
        let s = ApgSettings { psi: 0.1, eta: 0.1, iters: 100, backtrack: false, tol: 0.0 };
        assert!(matches!(
            accelerated_gradient(f, |x| x, [1.0, 1.0], s),
            Err(Error::NumericalFailure { .. })
        ));
    }
}
