//! Multi-hop full-duplex mmWave relay chain.
//!
//! Per-hop service in one slot is `ln(1 + γ)` nats with log-normal SINR `γ`.
//! The chain's service MGF bound is turned into a delay tail bound through a
//! Chernoff step, optimised over the free parameter `θ`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::snc::{aggregate_arrivals, golden_min, StochasticArrival};

/// Which random variable enters `q̂(-θ) = E[(1 + X)^{-θ}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QhatVariable {
    /// Relay-hop SINR `γ`.
    #[default]
    Sinr,
    /// Linear shadowing factor `10^{ξ/10}` alone.
    Shadowing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmWaveParams {
    /// Floating intercept of the path-loss fit (dB).
    pub alpha_fit: f64,
    /// Path-loss slope.
    pub beta_fit: f64,
    /// Shadowing standard deviation (dB).
    pub v: f64,
    /// Self-interference coefficient.
    pub mu_si: f64,
    /// Transmit SNR, linear.
    pub snr: f64,
    pub kappa: f64,
    /// Nodes on the flow: source, relays and destination.
    pub n_vehicles: u32,
    /// Hop length in meters.
    pub link_length: f64,
    /// Quadrature step for `q̂`.
    pub delta: f64,
    /// Default MGF parameter when no optimisation is requested.
    pub theta: f64,
    /// Packet size in nats.
    pub packet_nats: f64,
    pub qhat_variable: QhatVariable,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
}

impl Default for MmWaveParams {
    fn default() -> Self {
        crate::presets::mmwave_defaults()
    }
}

impl MmWaveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(0.0..=1.0).contains(&self.mu_si) {
            return bad("mu_si must lie in [0, 1]");
        }
        if !(self.snr > 0.0) || !(self.kappa > 0.0) {
            return bad("snr and kappa must be positive");
        }
        if !(self.delta > 0.0) || !(self.theta > 0.0) {
            return bad("delta and theta must be positive");
        }
        if self.n_vehicles < 2 {
            return bad("a flow needs at least two vehicles");
        }
        if !(self.link_length > 0.0) || !(self.v >= 0.0) || !(self.packet_nats > 0.0) {
            return bad("link_length and packet_nats must be positive, v non-negative");
        }
        if !(self.theta_min > 0.0 && self.theta_max > self.theta_min && self.theta_points >= 2) {
            return bad("theta search range is empty");
        }
        Ok(())
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n_vehicles = n;
        self
    }

    /// `ω_i`: relays are damped by self-interference, the destination is not.
    pub fn omega(&self, index: u32) -> f64 {
        if index >= self.n_vehicles {
            self.snr
        } else {
            self.snr / (1.0 + self.mu_si * self.snr)
        }
    }

    /// Median SINR of hop `index` in dB.
    pub fn sinr_db_median(&self, index: u32) -> f64 {
        10.0 * (self.kappa * self.omega(index)).log10() - self.alpha_fit - 10.0 * self.beta_fit * self.link_length.log10()
    }

    /// CDF of the variable configured by [`QhatVariable`].
    pub fn qhat_cdf(&self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let (median, v) = match self.qhat_variable {
            QhatVariable::Sinr => (self.sinr_db_median(1), self.v),
            QhatVariable::Shadowing => (0.0, self.v),
        };
        log_normal_db_cdf(median, v)
    }
}

/// CDF of `X` where `10 log10 X ~ N(median_db, v²)`.
pub fn log_normal_db_cdf(median_db: f64, v: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    let normal = if v > 0.0 { Normal::new(median_db, v).ok() } else { None };
    let at = 10f64.powf(median_db / 10.0);
    move |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        match &normal {
            Some(d) => d.cdf(10.0 * x.log10()),
            None if x >= at => 1.0,
            None => 0.0,
        }
    }
}

/// Gain (linear) and SINR of hop `index` for a shadowing draw `xi` in dB.
pub fn link_sinr_with_shadowing(p: &MmWaveParams, index: u32, xi: f64) -> (f64, f64) {
    let g_db = -(p.alpha_fit + 10.0 * p.beta_fit * p.link_length.log10() + xi);
    let g = 10f64.powf(g_db / 10.0);
    (g, p.kappa * p.omega(index) * g)
}

/// Gain and SINR of hop `index` at zero shadowing.
pub fn link_sinr(p: &MmWaveParams, index: u32) -> (f64, f64) {
    link_sinr_with_shadowing(p, index, 0.0)
}

/// Tail-truncation level for the `q̂` sum.
const QHAT_TAIL: f64 = 1e-10;
const QHAT_MAX_CELLS: usize = 50_000_000;

fn check_cdf(x: f64, f: f64, prev: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) || f + 1e-15 < prev {
        Err(Error::InvalidCdf(x))
    } else {
        Ok(())
    }
}

/// `min_u {(1 + δ N_δ(u))^{-θ} + Σ_{i ≤ N_δ(u)} a_{θ,δ}(i) F(iδ)}`.
///
/// The bracket never increases with `N`, so the sum runs until the largest
/// possible remaining decrease `(1 + Nδ)^{-θ}(1 - F(Nδ))` is negligible.
pub fn q_hat(theta: f64, delta: f64, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if !(theta > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter("q_hat needs theta > 0 and delta > 0".into()));
    }
    let mut prev_pow = 1.0;
    let mut prev_f = 0.0;
    let mut sum = 0.0;
    for i in 1..=QHAT_MAX_CELLS {
        let x = i as f64 * delta;
        let f = cdf(x);
        check_cdf(x, f, prev_f)?;
        let pow = (-theta * (x).ln_1p()).exp();
        sum += (prev_pow - pow) * f;
        prev_pow = pow;
        prev_f = f;
        if pow * (1.0 - f) < QHAT_TAIL {
            break;
        }
    }
    Ok((prev_pow + sum).min(1.0))
}

/// `q̂` with the CDF sampled once, for repeated evaluation at many `θ`.
#[derive(Debug, Clone)]
pub struct QhatGrid {
    ln1p: Vec<f64>,
    cdf: Vec<f64>,
}

impl QhatGrid {
    pub fn new(delta: f64, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let mut ln1p = Vec::new();
        let mut vals = Vec::new();
        let mut prev = 0.0;
        for i in 1..=QHAT_MAX_CELLS {
            let x = i as f64 * delta;
            let f = cdf(x);
            check_cdf(x, f, prev)?;
            ln1p.push(x.ln_1p());
            vals.push(f);
            prev = f;
            if 1.0 - f < QHAT_TAIL {
                break;
            }
        }
        Ok(Self { ln1p, cdf: vals })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut prev_pow = 1.0;
        let mut sum = 0.0;
        for (l, f) in self.ln1p.iter().zip(&self.cdf) {
            let pow = (-theta * l).exp();
            sum += (prev_pow - pow) * f;
            prev_pow = pow;
        }
        (prev_pow + sum).min(1.0)
    }
}

/// `ln 𝒢_{τ,n}(x)` with `𝒢 = min(𝒢₁, 𝒢₂)`.
pub fn ln_g_tau_n(tau: u64, n: u64, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::DomainError(x));
    }
    let ln_base = -((n + 1) as f64) * (-x).ln_1p();
    let ln_g1 = (tau as f64 * x.ln() + ln_binomial(n + tau, n)).min(0.0) + ln_base;
    if tau == 0 {
        return Ok(ln_g1);
    }
    // The subtracted term peaks at `τ*`; past it the prefix minimum of `𝒢₂` is
    // the value at `τ*`, which keeps the bound non-increasing in `τ`.
    let peak = (x * (n + 1) as f64 / (1.0 - x)).ceil().clamp(1.0, u64::MAX as f64 / 4.0) as u64;
    let tau = tau.min(peak);
    let ln_sub = ln_binomial(n + tau, n + 1) + (tau - 1) as f64 * x.ln();
    let d = ln_sub - ln_base;
    let ln_g2 = if d < -1e-3 {
        ln_base + (-d.exp()).ln_1p()
    } else {
        ln_g2_without_cancellation(tau, n, x)
    };
    Ok(ln_g1.min(ln_g2))
}

/// `𝒢₂` as the series tail from `τ` plus `Σ_{k<τ} C(n+k,n)(x^k - x^{τ-1})`,
/// both sums of non-negative terms.
fn ln_g2_without_cancellation(tau: u64, n: u64, x: f64) -> f64 {
    let ln_x = x.ln();
    let ln_term = |k: u64| ln_binomial(n + k, n) + k as f64 * ln_x;
    let mut terms = Vec::new();
    let mut k = tau;
    let mut peak = f64::NEG_INFINITY;
    loop {
        let t = ln_term(k);
        terms.push(t);
        peak = peak.max(t);
        // Past the mode the ratio of consecutive terms is below 1 and tends to x.
        let ratio = x * (n + k + 1) as f64 / (k + 1) as f64;
        if ratio < 1.0 && t + (1.0 / (1.0 - ratio)).ln() < peak - 40.0 {
            terms.push(t + ratio.ln() - (1.0 - ratio).ln());
            break;
        }
        k += 1;
    }
    let last = (tau - 1) as f64 * ln_x;
    for k in 0..tau - 1 {
        let gap = (last - k as f64 * ln_x).exp();
        terms.push(ln_binomial(n + k, n) + k as f64 * ln_x + (-gap).ln_1p());
    }
    log_sum_exp(&terms)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

pub fn g_tau_n(tau: u64, n: u64, x: f64) -> Result<f64> {
    ln_g_tau_n(tau, n, x).map(f64::exp)
}

/// Service MGF bound of the relay chain at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceBound {
    pub theta: f64,
    pub sigma_theta: f64,
    pub pa_theta: f64,
    pub qhat: f64,
    /// `n - 1`, the index of `𝒢` used by the chain.
    pub hops: u64,
}

impl ServiceBound {
    pub fn g_value(&self, tau: u64, n: u64, x: f64) -> Result<f64> {
        g_tau_n(tau, n, x)
    }

    /// `pa(θ) q̂(-θ)`, which must stay below 1.
    pub fn load(&self) -> f64 {
        self.pa_theta * self.qhat
    }

    /// `e^{θσ} pa^{t-s} 𝒢_{τ,n-1}(pa q̂)` with `τ = max(s - t, 0)`.
    pub fn mgf_bound(&self, s: f64, t: f64) -> Result<f64> {
        let tau = (s - t).max(0.0).floor() as u64;
        let ln = self.theta * self.sigma_theta + (t - s) * self.pa_theta.ln() + ln_g_tau_n(tau, self.hops, self.load())?;
        Ok(ln.exp())
    }

    /// `ln P{delay > w}` bound at this `θ` for `w` whole slots.
    pub fn ln_delay_bound(&self, w: u64) -> Result<f64> {
        Ok(self.theta * self.sigma_theta - w as f64 * self.pa_theta.ln() + ln_g_tau_n(w, self.hops, self.load())?)
    }
}

/// Arrivals at the chain: one Poisson source per upstream vehicle.
pub fn flow_arrival(p: &MmWaveParams, lambda: f64, theta: f64) -> Result<StochasticArrival> {
    let one = StochasticArrival::poisson(lambda, p.packet_nats, theta)?;
    let flows = vec![one; (p.n_vehicles - 1) as usize];
    aggregate_arrivals(&flows)
}

/// Minimises `f` over a log-spaced grid, then refines once by golden section
/// between the neighbours of the best grid point. `f` returns `None` where the
/// constraint fails. Ties keep the smallest `θ`.
pub fn minimize_log_grid(f: impl Fn(f64) -> Option<f64> + Sync, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
    let grid = log_grid(lo, hi, points);
    let values: Vec<Option<f64>> = grid.par_iter().map(|&t| f(t).filter(|v| !v.is_nan())).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b - 1e-12 * b.abs().max(1e-300)) {
                best = Some((i, v));
            }
        }
    }
    let (i, v) = best.ok_or(Error::EmptyStabilityRegion)?;
    let a = grid[i.saturating_sub(1)].ln();
    let b = grid[(i + 1).min(points - 1)].ln();
    let (u, fu) = golden_min(|u| f(u.exp()).unwrap_or(f64::INFINITY), a, b, 40);
    if fu < v - 1e-12 * v.abs().max(1e-300) {
        Ok((u.exp(), fu))
    } else {
        Ok((grid[i], v))
    }
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect();
    g[0] = lo;
    g[points - 1] = hi;
    g
}

/// A point of the delay tail bound with the `θ` that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub x: f64,
    pub probability: f64,
    pub theta: f64,
}

#[derive(Debug)]
struct QhatTable {
    thetas: Vec<f64>,
    ln_qhat: Vec<f64>,
    grid: QhatGrid,
}

type QhatKey = [u64; 6];

/// Tables are shared between models with the same channel law, since
/// building one dominates the cost of a model.
fn qhat_table(p: &MmWaveParams) -> Result<Arc<QhatTable>> {
    static CACHE: OnceLock<Mutex<HashMap<QhatKey, Arc<QhatTable>>>> = OnceLock::new();
    let (median, v) = match p.qhat_variable {
        QhatVariable::Sinr => (p.sinr_db_median(1), p.v),
        QhatVariable::Shadowing => (0.0, p.v),
    };
    let key = [median.to_bits(), v.to_bits(), p.delta.to_bits(), p.theta_min.to_bits(), p.theta_max.to_bits(), p.theta_points as u64];
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("cache lock").get(&key) {
        return Ok(t.clone());
    }
    let grid = QhatGrid::new(p.delta, p.qhat_cdf())?;
    let thetas = log_grid(p.theta_min, p.theta_max, p.theta_points);
    let ln_qhat = thetas.par_iter().map(|&t| grid.eval(t).ln()).collect();
    let table = Arc::new(QhatTable { thetas, ln_qhat, grid });
    let mut map = cache.lock().expect("cache lock");
    if map.len() >= 64 {
        map.clear();
    }
    map.insert(key, table.clone());
    Ok(table)
}

/// Chain model with `q̂` tabulated on the `θ` search grid.
#[derive(Debug, Clone)]
pub struct MmWaveModel {
    params: MmWaveParams,
    table: Arc<QhatTable>,
}

impl MmWaveModel {
    pub fn new(params: MmWaveParams) -> Result<Self> {
        params.validate()?;
        let table = qhat_table(&params)?;
        Ok(Self { params, table })
    }

    pub fn params(&self) -> &MmWaveParams {
        &self.params
    }

    /// `q̂(-θ)`. Between tabulated points `ln q̂` is interpolated linearly in
    /// `θ`, which over-estimates it because `ln q̂` is convex.
    pub fn qhat(&self, theta: f64) -> f64 {
        let QhatTable { thetas: t, ln_qhat, grid } = &*self.table;
        if theta < t[0] || theta > t[t.len() - 1] {
            return grid.eval(theta);
        }
        let k = t.partition_point(|&v| v <= theta).clamp(1, t.len() - 1);
        let (t0, t1) = (t[k - 1], t[k]);
        let w = (theta - t0) / (t1 - t0);
        ((1.0 - w) * ln_qhat[k - 1] + w * ln_qhat[k]).exp()
    }

    pub fn service_bound(&self, arrival: &StochasticArrival) -> Result<ServiceBound> {
        let theta = arrival.theta();
        let b = ServiceBound {
            theta,
            sigma_theta: arrival.sigma(),
            pa_theta: arrival.pa(),
            qhat: self.qhat(theta),
            hops: (self.params.n_vehicles - 1) as u64,
        };
        if !(b.load() < 1.0) {
            return Err(Error::UnstableRegime { value: b.load() });
        }
        Ok(b)
    }

    fn ln_bound_at(&self, arrival: &StochasticArrival, theta: f64, w: u64) -> Option<f64> {
        let a = arrival.at_theta(theta).ok()?;
        if !a.ln_pa().is_finite() {
            return None;
        }
        let b = self.service_bound(&a).ok()?;
        b.ln_delay_bound(w).ok()
    }

    /// Delay bound at a fixed `θ`.
    pub fn delay_ccdf_at(&self, arrival: &StochasticArrival, x: f64) -> Result<f64> {
        let w = whole_slots(x);
        if w == 0 {
            return Ok(1.0);
        }
        let b = self.service_bound(arrival)?;
        Ok(b.ln_delay_bound(w)?.exp().min(1.0))
    }

    /// `θ` minimising the delay bound at `x`, and the bound's logarithm.
    pub fn optimize_theta(&self, arrival: &StochasticArrival, x: f64) -> Result<(f64, f64)> {
        let w = whole_slots(x);
        let p = &self.params;
        minimize_log_grid(|t| self.ln_bound_at(arrival, t, w), p.theta_min, p.theta_max, p.theta_points)
    }

    /// Upper bound on `P{delay > x}` with `θ` optimised at `x`.
    pub fn delay_ccdf(&self, arrival: &StochasticArrival, x: f64) -> Result<DelayPoint> {
        if whole_slots(x) == 0 {
            // Still report a stable θ so callers can log it.
            let (theta, _) = self.optimize_theta(arrival, 1.0)?;
            return Ok(DelayPoint { x, probability: 1.0, theta });
        }
        let (theta, ln) = self.optimize_theta(arrival, x)?;
        Ok(DelayPoint { x, probability: ln.exp().min(1.0), theta })
    }

    /// Smallest whole delay whose bound is at most `p`, searched up to `max_x`.
    pub fn delay_quantile(&self, arrival: &StochasticArrival, p: f64, max_x: f64) -> Result<f64> {
        crate::hybrid::quantile_search(|x| self.delay_ccdf(arrival, x).map(|d| d.probability), p, max_x, true)
    }
}

fn whole_slots(x: f64) -> u64 {
    if x.is_finite() && x > 0.0 {
        x.floor() as u64
    } else if x > 0.0 {
        u64::MAX / 4
    } else {
        0
    }
}

/// Convenience wrapper: builds the model and evaluates one point with the
/// arrival's own `θ` replaced by the optimum.
pub fn mmwave_delay_ccdf(p: &MmWaveParams, arrival: &StochasticArrival, x: f64) -> Result<f64> {
    Ok(MmWaveModel::new(p.clone())?.delay_ccdf(arrival, x)?.probability)
}
