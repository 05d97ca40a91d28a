use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear, non-decreasing cumulative curve on `t >= 0`.
///
/// The curve interpolates linearly between breakpoints and continues past
/// the last one with `tail_slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    points: Vec<(f64, f64)>,
    tail_slope: f64,
}

impl Curve {
    /// Builds a curve from breakpoints; the tail continues the final segment.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let tail_slope = match points.len() {
            0 | 1 => 0.0,
            n => {
                let (t0, v0) = points[n - 2];
                let (t1, v1) = points[n - 1];
                (v1 - v0) / (t1 - t0)
            }
        };
        Self::with_tail(points, tail_slope)
    }

    pub fn with_tail(points: Vec<(f64, f64)>, tail_slope: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("curve needs at least one breakpoint".into()));
        }
        if points[0].0 != 0.0 {
            return Err(Error::InvalidParameter("first breakpoint must sit at t = 0".into()));
        }
        if points[0].1 < 0.0 {
            return Err(Error::InvalidParameter("curve value at t = 0 is negative".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter("breakpoint times must strictly increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidParameter("curve values must be non-decreasing".into()));
            }
        }
        if !(tail_slope >= 0.0) || !tail_slope.is_finite() {
            return Err(Error::InvalidParameter(format!("tail slope {tail_slope} must be finite and >= 0")));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter("curve breakpoints must be finite".into()));
        }
        Ok(Self { points, tail_slope })
    }

    /// `rate * t`
    pub fn linear(rate: f64) -> Self {
        Self::affine(0.0, rate)
    }

    /// `burst + rate * t`
    pub fn affine(burst: f64, rate: f64) -> Self {
        Self { points: vec![(0.0, burst.max(0.0))], tail_slope: rate.max(0.0) }
    }

    /// `rate * max(t - latency, 0)`
    pub fn rate_latency(rate: f64, latency: f64) -> Self {
        if latency <= 0.0 {
            return Self::linear(rate);
        }
        Self { points: vec![(0.0, 0.0), (latency, 0.0)], tail_slope: rate.max(0.0) }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn last_time(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.points[0].1;
        }
        let idx = self.points.partition_point(|&(pt, _)| pt <= t);
        if idx == self.points.len() {
            let (tl, vl) = self.points[idx - 1];
            return vl + self.tail_slope * (t - tl);
        }
        let (t0, v0) = self.points[idx - 1];
        let (t1, v1) = self.points[idx];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Slope of the curve immediately to the right of `t`.
    pub fn right_slope(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&(pt, _)| pt <= t);
        if idx == self.points.len() {
            self.tail_slope
        } else {
            let (t0, v0) = self.points[idx - 1];
            let (t1, v1) = self.points[idx];
            (v1 - v0) / (t1 - t0)
        }
    }

    /// Lower pseudo-inverse `inf { s >= 0 : curve(s) >= v }`; `None` when never reached.
    pub fn pseudo_inverse(&self, v: f64) -> Option<f64> {
        if v <= self.points[0].1 {
            return Some(0.0);
        }
        for w in self.points.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if v <= v1 {
                if v1 == v0 {
                    return Some(t1);
                }
                return Some(t0 + (v - v0) * (t1 - t0) / (v1 - v0));
            }
        }
        let (tl, vl) = self.points[self.points.len() - 1];
        if self.tail_slope > 0.0 {
            Some(tl + (v - vl) / self.tail_slope)
        } else {
            None
        }
    }
}

/// One shifted copy `t -> fixed + other(t - shift)` taking part in the
/// lower envelope of a min-plus convolution.
struct ShiftedCopy<'a> {
    shift: f64,
    fixed: f64,
    curve: &'a Curve,
}

impl ShiftedCopy<'_> {
    fn eval(&self, t: f64) -> Option<f64> {
        (t >= self.shift - 1e-15).then(|| self.fixed + self.curve.eval(t - self.shift))
    }

    fn slope_right(&self, t: f64) -> f64 {
        self.curve.right_slope((t - self.shift).max(0.0))
    }
}

fn exact_minplus(a: &Curve, b: &Curve, t: f64) -> f64 {
    let mut best = a.eval(0.0) + b.eval(t);
    for &(tau, va) in a.points() {
        if tau <= t {
            best = best.min(va + b.eval(t - tau));
        }
    }
    for &(s, vb) in b.points() {
        if s <= t {
            best = best.min(a.eval(t - s) + vb);
        }
    }
    best.min(a.eval(t) + b.eval(0.0))
}

/// Min-plus convolution `(a ⊗ b)(t) = inf_{0 <= τ <= t} a(τ) + b(t - τ)`.
///
/// The result is exact: breakpoints are placed at all sums of input
/// breakpoints plus every crossing of the shifted copies whose lower
/// envelope forms the convolution.
pub fn minplus_convolve(a: &Curve, b: &Curve) -> Curve {
    let mut copies: Vec<ShiftedCopy<'_>> = Vec::new();
    for &(tau, va) in a.points() {
        copies.push(ShiftedCopy { shift: tau, fixed: va, curve: b });
    }
    for &(s, vb) in b.points() {
        copies.push(ShiftedCopy { shift: s, fixed: vb, curve: a });
    }

    let mut grid: Vec<f64> = Vec::new();
    for &(tau, _) in a.points() {
        for &(s, _) in b.points() {
            grid.push(tau + s);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);

    let mut times = grid.clone();
    let end = *grid.last().unwrap();
    // Segments between consecutive grid points, plus the unbounded tail.
    let mut bounds: Vec<(f64, Option<f64>)> = grid.windows(2).map(|w| (w[0], Some(w[1]))).collect();
    bounds.push((end, None));
    for (lo, hi) in bounds {
        let active: Vec<&ShiftedCopy<'_>> = copies.iter().filter(|c| c.shift <= lo + 1e-12).collect();
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let (ci, cj) = (active[i], active[j]);
                let (vi, vj) = (ci.eval(lo).unwrap(), cj.eval(lo).unwrap());
                let (si, sj) = (ci.slope_right(lo), cj.slope_right(lo));
                if (si - sj).abs() < 1e-15 {
                    continue;
                }
                let dt = (vj - vi) / (si - sj);
                if dt > 1e-12 && hi.is_none_or(|h| lo + dt < h - 1e-12) {
                    times.push(lo + dt);
                }
            }
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);

    let points: Vec<(f64, f64)> = times.iter().map(|&t| (t, exact_minplus(a, b, t))).collect();
    let last = *times.last().unwrap();
    let probe = last + 1.0;
    let tail_slope = (exact_minplus(a, b, probe) - exact_minplus(a, b, last)).max(0.0);
    let mut points = points;
    // Guard against rounding producing tiny decreases.
    for i in 1..points.len() {
        if points[i].1 < points[i - 1].1 {
            points[i].1 = points[i - 1].1;
        }
    }
    Curve { points, tail_slope }
}

/// Evaluates the min-plus convolution at a single point without building the curve.
pub fn minplus_at(a: &Curve, b: &Curve, t: f64) -> f64 {
    exact_minplus(a, b, t)
}
