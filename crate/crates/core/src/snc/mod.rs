//! Stochastic network calculus primitives: piecewise-linear curves,
//! bounding functions, the two convolutions, horizontal deviation and the
//! generic delay-bound theorem
//!
//! ```text
//! P{ d(t) > h(α + x, β) } <= (f ⊗ g)(x)
//! ```
//!
//! where `f` bounds the arrival envelope violation and `g` the service
//! deficit. Everything here is a pure function of its inputs.

mod arrival;
mod curve;
mod deviation;
mod stieltjes;
mod tail;

pub use arrival::{aggregate_arrivals, poisson_rho, StochasticArrival};
pub use curve::{minplus_at, minplus_convolve, Curve};
pub use deviation::horizontal_deviation;
pub use stieltjes::{stieltjes_convolve, stieltjes_sum, StieltjesOptions};
pub use tail::{convolve_tailbounds, convolve_tailbounds_with, TailBound, DEFAULT_GRID};

pub(crate) use tail::golden_min;

use crate::error::Result;

/// Largest envelope offset `x` whose horizontal deviation still fits in `delay`.
///
/// Returns `None` when even `x = 0` overshoots the delay.
pub fn offset_for_delay(alpha: &Curve, beta: &Curve, delay: f64) -> Result<Option<f64>> {
    if horizontal_deviation(alpha, beta, 0.0)? > delay {
        return Ok(None);
    }
    let mut hi = 1.0f64;
    while horizontal_deviation(alpha, beta, hi)? <= delay {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(Some(f64::INFINITY));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if horizontal_deviation(alpha, beta, mid)? <= delay {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(Some(lo))
}

/// Delay tail bound `P{d > delay}` from an arrival curve with bounding
/// function `f` and a service curve with bounding function `g`.
pub fn delay_bound(alpha: &Curve, beta: &Curve, f: &TailBound, g: &TailBound, delay: f64) -> Result<f64> {
    match offset_for_delay(alpha, beta, delay)? {
        None => Ok(1.0),
        Some(x) => Ok(convolve_tailbounds(f, g, x)),
    }
}

#[cfg(test)]
mod tests;
