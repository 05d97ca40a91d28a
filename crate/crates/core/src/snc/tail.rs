use std::fmt;
use std::sync::Arc;

/// Number of grid cells used by the default infimum searches.
pub const DEFAULT_GRID: usize = 10_000;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Non-increasing bounding function `x -> probability`.
///
/// Values are clamped into `[0, 1]` and saturate at 1 for
/// `x <= support_floor`. `knots` lists known discontinuities so that
/// infimum searches can visit them exactly.
#[derive(Clone)]
pub struct TailBound {
    evaluator: Evaluator,
    support_floor: f64,
    knots: Vec<f64>,
}

impl fmt::Debug for TailBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailBound")
            .field("support_floor", &self.support_floor)
            .field("knots", &self.knots)
            .finish_non_exhaustive()
    }
}

impl TailBound {
    pub fn new(support_floor: f64, evaluator: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { evaluator: Arc::new(evaluator), support_floor, knots: Vec::new() }
    }

    pub fn with_knots(mut self, knots: Vec<f64>) -> Self {
        self.knots = knots;
        self
    }

    /// The bound that is identically zero for `x >= 0`.
    pub fn zero() -> Self {
        Self::new(f64::NEG_INFINITY, |_| 0.0)
    }

    /// `min(1, e^{-rate x})`
    pub fn exponential(rate: f64) -> Self {
        Self::new(0.0, move |x| (-rate * x).exp())
    }

    /// 1 below `at`, 0 from `at` on.
    pub fn step(at: f64) -> Self {
        Self::new(f64::NEG_INFINITY, move |x| if x < at { 1.0 } else { 0.0 }).with_knots(vec![at])
    }

    pub fn support_floor(&self) -> f64 {
        self.support_floor
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.support_floor {
            return 1.0;
        }
        let v = (self.evaluator)(x);
        if v.is_nan() {
            1.0
        } else {
            v.clamp(0.0, 1.0)
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of `f` on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid search with one level of golden-section refinement around the
/// best grid point; `extra` candidates are evaluated exactly.
pub(crate) fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize, extra: &[f64]) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let h = (hi - lo) / cells as f64;
    let mut best = (lo, f(lo));
    let mut best_k = 0usize;
    for k in 1..=cells {
        let u = if k == cells { hi } else { lo + k as f64 * h };
        let v = f(u);
        if v < best.1 {
            best = (u, v);
            best_k = k;
        }
    }
    let a = lo + best_k.saturating_sub(1) as f64 * h;
    let b = (lo + (best_k + 1) as f64 * h).min(hi);
    let refined = golden_min(&f, a, b, 40);
    if refined.1 < best.1 {
        best = refined;
    }
    for &u in extra {
        if u >= lo && u <= hi {
            let v = f(u);
            if v < best.1 {
                best = (u, v);
            }
        }
    }
    best
}

/// `min(1, inf_{0 <= u <= x} f(u) + g(x - u))`: the min-plus convolution of
/// two bounding functions.
pub fn convolve_tailbounds(f: &TailBound, g: &TailBound, x: f64) -> f64 {
    convolve_tailbounds_with(f, g, x, DEFAULT_GRID)
}

pub fn convolve_tailbounds_with(f: &TailBound, g: &TailBound, x: f64, cells: usize) -> f64 {
    if !x.is_finite() {
        return if x > 0.0 { (f.eval(x) + g.eval(0.0)).min(f.eval(0.0) + g.eval(x)).min(1.0) } else { 1.0 };
    }
    if x < 0.0 {
        return 1.0;
    }
    let mut extra: Vec<f64> = f.knots().to_vec();
    extra.extend(g.knots().iter().map(|k| x - k));
    let (_, v) = grid_min(|u| f.eval(u) + g.eval(x - u), 0.0, x, cells, &extra);
    v.min(1.0)
}
