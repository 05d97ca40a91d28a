use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided Clopper–Pearson interval for `k` hits out of `n` at level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64).map_or(0.0, |b| b.inverse_cdf(alpha / 2.0))
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64).map_or(1.0, |b| b.inverse_cdf(1.0 - alpha / 2.0))
    };
    (lo, hi)
}

/// Sorted delay samples with CCDF queries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCcdf {
    samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub x: f64,
    pub ccdf: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EmpiricalCcdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Number of samples strictly above `x`.
    pub fn exceed(&self, x: f64) -> u64 {
        (self.samples.len() - self.samples.partition_point(|&s| s <= x)) as u64
    }

    /// Empirical `P{X > x}`, 0 for an empty sample.
    pub fn ccdf(&self, x: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.exceed(x) as f64 / self.samples.len() as f64
    }

    /// CCDF with a 95% Clopper–Pearson band.
    pub fn point(&self, x: f64) -> CcdfPoint {
        let n = self.samples.len() as u64;
        let k = self.exceed(x);
        let (lower, upper) = clopper_pearson(k, n, 0.05);
        CcdfPoint { x, ccdf: self.ccdf(x), lower, upper }
    }

    pub fn points(&self, xs: &[f64]) -> Vec<CcdfPoint> {
        xs.iter().map(|&x| self.point(x)).collect()
    }

    /// Smallest sample `s` with `P{X > s} <= p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let n = self.samples.len();
        let keep = ((1.0 - p) * n as f64).ceil() as usize;
        Some(self.samples[keep.clamp(1, n) - 1])
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }
}
