//! Contention-based broadcast channel with exponential backoff.
//!
//! Solves the collision fixed point, derives service and waiting times, and
//! turns them into a stochastic service curve with its bounding function.
//! All internal quantities are in slots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snc::{delay_bound, minplus_convolve, Curve, TailBound};

/// How the mean backoff counter relates to the window size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuDefinition {
    /// `CW/2`, counter uniform on `[0, CW]`.
    #[default]
    Half,
    /// `(CW + 1)/2`
    HalfUp,
    /// `(CW - 1)/2`, counter uniform on `[0, CW - 1]`.
    HalfDown,
}

impl MuDefinition {
    pub fn mean(self, cw: f64) -> f64 {
        match self {
            MuDefinition::Half => cw / 2.0,
            MuDefinition::HalfUp => (cw + 1.0) / 2.0,
            MuDefinition::HalfDown => (cw - 1.0) / 2.0,
        }
    }
}

/// Second moment of the service time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    /// Service is the sum of the stage times visited before the packet leaves,
    /// with the number of collisions capped at the last stage.
    #[default]
    StageSum,
    /// `Σ p_c^j t̄_j² - t̄_serv²`, the first-moment weights reused.
    StageWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackoffParams {
    /// Initial contention window `CW_min`.
    pub w: u32,
    /// Maximum window exponent.
    pub m: u32,
    /// Index of the last backoff stage.
    pub max_stage: u32,
    pub n: u32,
    pub t_s: f64,
    pub t_c: f64,
    pub t_tx: f64,
    /// Queue length in packets.
    pub queue_len: u32,
    /// Packets per slot.
    pub lambda: f64,
    /// Seconds per slot.
    pub slot_duration: f64,
    pub mu_def: MuDefinition,
    pub variance: VarianceModel,
}

impl Default for BackoffParams {
    fn default() -> Self {
        crate::presets::backoff_defaults()
    }
}

impl BackoffParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.w < 1 {
            return bad("W must be >= 1");
        }
        if self.m == 0 || self.m > self.max_stage {
            return bad("need 0 < m <= M");
        }
        if self.m > 30 {
            return bad("m too large");
        }
        if self.n < 1 {
            return bad("n must be >= 1");
        }
        if !(self.t_s > 0.0 && self.t_c > 0.0 && self.t_tx > 0.0) {
            return bad("t_s, t_C and t_TX must be positive");
        }
        if self.queue_len < 1 {
            return bad("L must be >= 1");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be >= 0");
        }
        if !(self.slot_duration > 0.0) {
            return bad("slot_duration must be positive");
        }
        Ok(())
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellularMetrics {
    pub p_c: f64,
    pub p_a: f64,
    pub cw: Vec<u64>,
    pub mu: Vec<f64>,
    pub t_b: f64,
    /// Mean time spent in each backoff stage.
    pub stage_times: Vec<f64>,
    pub t_bar_serv: f64,
    pub var_serv: f64,
    pub t_q: f64,
    pub b_sum: f64,
}

impl CellularMetrics {
    pub fn rho(&self, lambda: f64) -> f64 {
        lambda * self.t_bar_serv
    }
}

/// Window sizes `CW_0..CW_M`, their mean counters, and `ℬ = Σ(CW_k - 1)`.
pub fn contention_windows(p: &BackoffParams) -> (Vec<u64>, Vec<f64>, f64) {
    let w = p.w as u64;
    let cw: Vec<u64> = (0..=p.max_stage).map(|i| (w << i.min(p.m)).min(w << p.m)).collect();
    let mu = cw.iter().map(|&c| p.mu_def.mean(c as f64)).collect();
    let b_sum = cw.iter().map(|&c| c as f64 - 1.0).sum();
    (cw, mu, b_sum)
}

/// `p_a(p_c) = Σ p_c^k / Σ μ_k p_c^k`, capped at one attempt per slot.
pub fn attempt_probability(mu: &[f64], p_c: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut pk = 1.0;
    for &m in mu {
        num += pk;
        den += m * pk;
        pk *= p_c;
    }
    if den <= 0.0 {
        1.0
    } else {
        (num / den).min(1.0)
    }
}

fn collision_map(n: u32, p_a: f64) -> f64 {
    -(-((n as f64) - 1.0) * p_a).exp_m1()
}

const FIXED_POINT_TOL: f64 = 1e-12;
const DAMPING: f64 = 0.5;
const ITERATION_CAP: usize = 100_000;

/// Composed residual `r(p_c) = p_c - (1 - e^{-(n-1) p_a(p_c)})`.
pub fn collision_residual(p: &BackoffParams, mu: &[f64], p_c: f64) -> f64 {
    p_c - collision_map(p.n, attempt_probability(mu, p_c))
}

/// Damped iteration on `p_c`, falling back to bisection on the residual.
pub fn solve_collision_fixed_point(p: &BackoffParams) -> Result<(f64, f64)> {
    p.validate()?;
    let (_, mu, _) = contention_windows(p);
    if p.n == 1 {
        return Ok((0.0, attempt_probability(&mu, 0.0)));
    }
    let mut p_c = 0.5;
    for _ in 0..ITERATION_CAP {
        let next = collision_map(p.n, attempt_probability(&mu, p_c));
        let step = (1.0 - DAMPING) * p_c + DAMPING * next;
        if (step - p_c).abs() < FIXED_POINT_TOL * 0.1 {
            p_c = step;
            break;
        }
        p_c = step;
    }
    if collision_residual(p, &mu, p_c).abs() < FIXED_POINT_TOL {
        return Ok((p_c, attempt_probability(&mu, p_c)));
    }
    let p_c = bisect_collision(p, &mu)?;
    Ok((p_c, attempt_probability(&mu, p_c)))
}

/// Bisection on `r(p_c)` over `[0, 1]`; `r(0) < 0 < r(1)` whenever `n >= 2`.
pub fn bisect_collision(p: &BackoffParams, mu: &[f64]) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if collision_residual(p, mu, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let p_c = 0.5 * (lo + hi);
    let residual = collision_residual(p, mu, p_c).abs();
    if residual < FIXED_POINT_TOL {
        Ok(p_c)
    } else {
        Err(Error::NoConvergence { residual })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments {
    pub t_b: f64,
    pub t_bar_serv: f64,
    pub var_serv: f64,
    pub t_q: f64,
}

/// Probability that a packet leaves after exactly `k` collisions, `k = 0..=M`.
pub fn collision_count_pmf(p_c: f64, max_stage: u32) -> Vec<f64> {
    let m = max_stage as usize;
    (0..=m)
        .map(|k| if k < m { p_c.powi(k as i32) * (1.0 - p_c) } else { p_c.powi(m as i32) })
        .collect()
}

/// Mean backoff slot, stage times, service mean and variance, and the
/// waiting term.
pub fn service_time_moments(p: &BackoffParams, p_c: f64, p_a: f64) -> Result<ServiceMoments> {
    let (_, mu, _) = contention_windows(p);
    let n = p.n as f64;
    let t_b = (1.0 - p_a).powf(n) + n * p_a * (1.0 - p_a).powf(n - 1.0) * p.t_tx + p_c * p.t_c;
    let stage: Vec<f64> = mu.iter().map(|m| m * t_b + p.t_tx).collect();
    let t_bar_serv: f64 = stage.iter().enumerate().map(|(j, t)| p_c.powi(j as i32) * t).sum();
    let second = match p.variance {
        VarianceModel::StageSum => {
            let pmf = collision_count_pmf(p_c, p.max_stage);
            let mut cum = 0.0;
            stage
                .iter()
                .zip(&pmf)
                .map(|(t, w)| {
                    cum += t;
                    w * cum * cum
                })
                .sum::<f64>()
        }
        VarianceModel::StageWeighted => stage.iter().enumerate().map(|(j, t)| p_c.powi(j as i32) * t * t).sum(),
    };
    let var_serv = (second - t_bar_serv * t_bar_serv).max(0.0);
    let rho = p.lambda * t_bar_serv;
    if rho >= 1.0 {
        return Err(Error::UnstableQueue { rho });
    }
    let t_q = rho + (rho * rho + p.lambda * p.lambda * var_serv) / (2.0 * (1.0 - rho));
    Ok(ServiceMoments { t_b, t_bar_serv, var_serv, t_q })
}

pub fn cellular_metrics(p: &BackoffParams) -> Result<CellularMetrics> {
    let (p_c, p_a) = solve_collision_fixed_point(p)?;
    let (cw, mu, b_sum) = contention_windows(p);
    let mom = service_time_moments(p, p_c, p_a)?;
    let stage_times = mu.iter().map(|m| m * mom.t_b + p.t_tx).collect();
    Ok(CellularMetrics {
        p_c,
        p_a,
        cw,
        mu,
        t_b: mom.t_b,
        stage_times,
        t_bar_serv: mom.t_bar_serv,
        var_serv: mom.var_serv,
        t_q: mom.t_q,
        b_sum,
    })
}

/// Service-time law under [`VarianceModel::StageSum`]: `(duration, probability)`.
pub fn service_time_distribution(p: &BackoffParams, m: &CellularMetrics) -> Vec<(f64, f64)> {
    let pmf = collision_count_pmf(m.p_c, p.max_stage);
    let mut cum = 0.0;
    m.stage_times
        .iter()
        .zip(pmf)
        .map(|(t, w)| {
            cum += t;
            (cum, w)
        })
        .collect()
}

/// `q` of the bounding function and the shared denominator
/// `M t_C + L t̄_serv + ℬ t_s`.
pub fn regime(p: &BackoffParams, m: &CellularMetrics) -> (f64, f64) {
    let l = p.queue_len as f64;
    let den = p.max_stage as f64 * p.t_c + l * m.t_bar_serv + m.b_sum * p.t_s;
    ((m.t_bar_serv + m.t_q - p.t_s) / den, den)
}

/// `y` for a delay argument of `x` slots.
pub fn regime_y(p: &BackoffParams, den: f64, x: f64) -> f64 {
    let l = p.queue_len as f64;
    (x - l * p.t_s) / (l * den)
}

/// `[(q/y)^y ((1-q)/(1-y))^{1-y}]^L` evaluated in log space, without any
/// region handling.
pub fn binomial_entropy_bound(q: f64, y: f64, l: f64) -> f64 {
    let xlogx = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (b / a).ln() };
    (l * (xlogx(y, q) + xlogx(1.0 - y, 1.0 - q))).exp()
}

/// Service curve `β(t) = (t̄_serv λ t) ⊗ (t_q λ t)` and the bounding function
/// `g_t` of the delay argument in slots.
///
/// `g_t` is 1 up to `y = q`, follows the entropy form above it, and is 0 once
/// `y >= 1` since at most `L` packets can be queued.
pub fn cellular_service_curve(p: &BackoffParams, m: &CellularMetrics) -> Result<(Curve, TailBound)> {
    let (q, den) = regime(p, m);
    if !(q < 1.0) {
        return Err(Error::InvalidRegime { q });
    }
    let beta = minplus_convolve(
        &Curve::linear(m.t_bar_serv * p.lambda),
        &Curve::linear(m.t_q * p.lambda),
    );
    let l = p.queue_len as f64;
    let params = p.clone();
    let q_eff = q.max(0.0);
    let x_at_q = l * p.t_s + q_eff * l * den;
    let x_at_one = l * p.t_s + l * den;
    let g = TailBound::new(x_at_q, move |x| {
        let y = regime_y(&params, den, x);
        if y <= q_eff {
            1.0
        } else if y >= 1.0 {
            0.0
        } else {
            binomial_entropy_bound(q_eff, y, l)
        }
    })
    .with_knots(vec![x_at_q, x_at_one]);
    Ok((beta, g))
}

/// Upper bound on `P{delay > x}` for `x` in slots.
pub fn cellular_delay_ccdf(p: &BackoffParams, x: f64) -> Result<f64> {
    let m = cellular_metrics(p)?;
    cellular_delay_ccdf_with(p, &m, x)
}

/// [`cellular_delay_ccdf`] with precomputed metrics.
///
/// The node's flow enters at the rate of its service curve, so the
/// horizontal deviation maps a backlog offset `x` to `x / R`, and the service
/// deficit bound in work units is `g_t(x / R)`.
pub fn cellular_delay_ccdf_with(p: &BackoffParams, m: &CellularMetrics, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    let (beta, g) = cellular_service_curve(p, m)?;
    let rate = beta.tail_slope();
    if rate <= 0.0 {
        return Ok(g.eval(x));
    }
    let deficit = work_deficit_bound(&g, rate);
    delay_bound(&Curve::linear(rate), &beta, &TailBound::zero(), &deficit, x)
}

/// Rescales a time-argument bound to one in work units for a service rate.
pub fn work_deficit_bound(g: &TailBound, rate: f64) -> TailBound {
    let inner = g.clone();
    let knots = g.knots().iter().map(|k| k * rate).collect();
    TailBound::new(g.support_floor() * rate, move |w| inner.eval(w / rate)).with_knots(knots)
}
