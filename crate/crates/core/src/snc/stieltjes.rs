use crate::error::{Error, Result};

/// Controls for the Riemann–Stieltjes sums behind [`stieltjes_convolve`].
#[derive(Debug, Clone, Copy)]
pub struct StieltjesOptions {
    /// Initial cell width.
    pub step: f64,
    /// Integration window `[lower, upper]` for the integrator variable.
    pub lower: f64,
    pub upper: f64,
    /// Absolute agreement required between the `h` and `h/2` sums.
    pub tolerance: f64,
    /// Number of step halvings allowed before giving up.
    pub max_halvings: usize,
    /// Upper bound on `|a|`, used by the truncation rule.
    pub integrand_bound: f64,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        Self { step: 1e-2, lower: 0.0, upper: 50.0, tolerance: 1e-6, max_halvings: 12, integrand_bound: 1.0 }
    }
}

/// One Riemann–Stieltjes sum of `∫ a(x - y) db(y)` with cells centred on
/// multiples of `h`, so an atom of `b` at a multiple of `h` is tagged exactly.
pub fn stieltjes_sum(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, x: f64, h: f64, lower: f64, upper: f64, bound: f64) -> f64 {
    let k_lo = (lower / h).round() as i64;
    let k_hi = (upper / h).round() as i64;
    let b_end = b(upper + 0.5 * h);
    let mut sum = 0.0;
    let mut left = b(k_lo as f64 * h - 0.5 * h);
    for k in k_lo..=k_hi {
        let c = k as f64 * h;
        let right = b(c + 0.5 * h);
        let db = right - left;
        if db != 0.0 {
            sum += a(x - c) * db;
        }
        left = right;
        // Remaining variation cannot move the sum by more than this.
        let rest = (b_end - right).abs() * bound;
        if rest <= 1e-12 * sum.abs() && k > 0 {
            break;
        }
    }
    sum
}

/// Stieltjes convolution `(a * b)(x) = ∫ a(x - y) db(y)` over the options'
/// window, refined by step halving until two consecutive sums agree.
pub fn stieltjes_convolve(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, x: f64, opts: &StieltjesOptions) -> Result<f64> {
    let mut h = opts.step;
    let mut prev = stieltjes_sum(&a, &b, x, h, opts.lower, opts.upper, opts.integrand_bound);
    for _ in 0..opts.max_halvings {
        h *= 0.5;
        let next = stieltjes_sum(&a, &b, x, h, opts.lower, opts.upper, opts.integrand_bound);
        if (next - prev).abs() < opts.tolerance {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergent(format!(
        "Stieltjes sum still moving after {} halvings (step {h:e})",
        opts.max_halvings
    )))
}
