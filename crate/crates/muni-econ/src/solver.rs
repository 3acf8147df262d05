//! Semiannual-compounding pricing and the bracketed yield solver shared by
//! the curve and bond modules.

use crate::util::pairwise_sum_by;

/// Price per 100 face of a cashflow list under a semiannually compounded
/// annual yield `y`: `sum_i a_i * (1 + y/2)^(-2 t_i)`.
pub(crate) fn price_semiannual(flows: &[(f64, f64)], y: f64) -> f64 {
    let base = 1.0 + y / 2.0;
    pairwise_sum_by(flows.len(), |i| {
        let (t, a) = flows[i];
        a * base.powf(-2.0 * t)
    })
}

/// d(price)/dy; used for Newton steps.
fn price_derivative(flows: &[(f64, f64)], y: f64) -> f64 {
    let base = 1.0 + y / 2.0;
    pairwise_sum_by(flows.len(), |i| {
        let (t, a) = flows[i];
        -a * t * base.powf(-2.0 * t - 1.0)
    })
}

#[derive(Debug)]
pub(crate) struct BracketMiss {
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
}

const BRACKET_LO: f64 = -0.5;
const BRACKET_HI: f64 = 2.0;
const PRICE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 1000;

/// Solve `price_semiannual(flows, y) = target` for `y` on the fixed bracket
/// [-0.5, 2.0].
///
/// Pricing with positive amounts is strictly decreasing in `y`, so the root
/// is unique when it exists. The iteration takes a Newton step whenever that
/// step stays strictly inside the current bracket and falls back to bisection
/// otherwise; the bracket is tightened every iteration, so the result does
/// not depend on any initial guess. Converges when the absolute price gap
/// drops below 1e-10.
pub(crate) fn solve_semiannual_yield(
    flows: &[(f64, f64)],
    target: f64,
) -> Result<f64, BracketMiss> {
    let p_lo = price_semiannual(flows, BRACKET_LO);
    let p_hi = price_semiannual(flows, BRACKET_HI);
    if target > p_lo || target < p_hi {
        return Err(BracketMiss {
            lo: BRACKET_LO,
            hi: BRACKET_HI,
            target,
        });
    }
    let (mut lo, mut hi) = (BRACKET_LO, BRACKET_HI);
    let mut y = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let gap = price_semiannual(flows, y) - target;
        if gap.abs() < PRICE_TOL {
            return Ok(y);
        }
        if gap > 0.0 {
            lo = y; // price too high: yield must rise
        } else {
            hi = y;
        }
        let slope = price_derivative(flows, y);
        let newton = y - gap / slope;
        y = if slope.is_finite() && slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * y.abs().max(1.0) {
            break;
        }
    }
    Ok(y)
}
