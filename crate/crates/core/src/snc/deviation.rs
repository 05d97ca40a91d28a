use super::curve::Curve;
use crate::error::{Error, Result};

/// Horizontal deviation `h(α + x, β) = sup_t inf { τ >= 0 : α(t) + x <= β(t + τ) }`.
///
/// The deviation is piecewise linear in `t` with kinks at breakpoints of
/// `α` and where `α + x` crosses a breakpoint value of `β`, so the supremum is
/// taken over those candidates.
pub fn horizontal_deviation(alpha: &Curve, beta: &Curve, x: f64) -> Result<f64> {
    let (ra, rb) = (alpha.tail_slope(), beta.tail_slope());
    if ra > rb * (1.0 + 1e-12) {
        return Err(Error::UnstableSystem { arrival: ra, service: rb });
    }

    let mut candidates: Vec<f64> = alpha.points().iter().map(|p| p.0).collect();
    for &(_, vb) in beta.points() {
        if let Some(t) = alpha.pseudo_inverse(vb - x) {
            candidates.push(t);
            // Just past a flat stretch of β the inverse jumps to its right end.
            candidates.push(t + 1e-9 * (1.0 + t));
        }
    }
    // Beyond every breakpoint the deviation is linear with slope ra/rb - 1 <= 0.
    let far = candidates.iter().cloned().fold(beta.last_time(), f64::max);
    candidates.push(far);

    let mut sup = 0.0f64;
    for t in candidates {
        let target = alpha.eval(t) + x;
        let reach = beta
            .pseudo_inverse(target)
            .ok_or(Error::UnstableSystem { arrival: ra, service: rb })?;
        sup = sup.max(reach - t);
    }
    Ok(sup.max(0.0))
}
