//! Parallel composition of the cellular and mmWave channels.
//!
//! Traffic is split statically. Each branch contributes a service rate in
//! packets per slot and a bound on its service deficit in packets; the
//! deficit bounds are combined by a Stieltjes convolution and the result is
//! read off at the offset the total rate clears in the requested delay.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cellular::{cellular_metrics, cellular_service_curve, work_deficit_bound, BackoffParams};
use crate::error::{Error, Result};
use crate::mmwave::{flow_arrival, log_grid, minimize_log_grid, MmWaveModel, MmWaveParams};
use crate::snc::{stieltjes_sum, TailBound};

/// Where the combined deficit bound is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentMode {
    /// `(g₁ * g₂)(y)`
    #[default]
    Full,
    /// `(g₁ * g₂)(y/2)`
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for EvalGrid {
    fn default() -> Self {
        Self { min: 1.0, max: 1e4, points: 200 }
    }
}

impl EvalGrid {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn xs(&self) -> Vec<f64> {
        log_grid(self.min, self.max, self.points.max(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Fraction of the traffic sent over mmWave.
    pub split: f64,
    pub cellular: BackoffParams,
    pub mmwave: MmWaveParams,
    /// Packets per slot offered by each vehicle.
    pub lambda_total: f64,
    pub argument: ArgumentMode,
    pub grid: EvalGrid,
    /// Size of the `θ` grid searched for every hybrid point.
    pub theta_points: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        let cellular = BackoffParams::default();
        Self {
            split: 0.5,
            lambda_total: cellular.lambda,
            cellular,
            mmwave: MmWaveParams::default(),
            argument: ArgumentMode::Full,
            grid: EvalGrid::default(),
            theta_points: 40,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.split) {
            return Err(Error::InvalidParameter(format!("split must lie in [0, 1], got {}", self.split)));
        }
        if !(self.lambda_total >= 0.0) {
            return Err(Error::InvalidParameter("lambda_total must be >= 0".into()));
        }
        self.cellular.validate()?;
        self.mmwave.validate()
    }

    /// Same vehicle count on both channels.
    pub fn with_n(mut self, n: u32) -> Self {
        self.cellular.n = n;
        self.mmwave.n_vehicles = n;
        self
    }

    pub fn with_lambda(mut self, lambda_total: f64) -> Self {
        self.lambda_total = lambda_total;
        self
    }

    pub fn with_split(mut self, split: f64) -> Self {
        self.split = split;
        self
    }

    fn cellular_branch(&self, lambda: f64) -> BackoffParams {
        self.cellular.clone().with_lambda(lambda)
    }
}

/// Which bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Cellular,
    Mmwave,
    Hybrid,
}

struct CellularBranch {
    rate: f64,
    deficit: TailBound,
    /// Deficit at and beyond which the bound is exactly 0.
    zero_from: f64,
}

fn build_cellular(p: &BackoffParams) -> Result<CellularBranch> {
    if p.lambda == 0.0 {
        return Ok(CellularBranch { rate: 0.0, deficit: TailBound::step(0.0), zero_from: 0.0 });
    }
    let m = cellular_metrics(p)?;
    let (beta, g) = cellular_service_curve(p, &m)?;
    let rate = beta.tail_slope();
    let deficit = work_deficit_bound(&g, rate);
    let zero_from = first_zero(&deficit);
    Ok(CellularBranch { rate, deficit, zero_from })
}

/// Smallest point found with `g = 0`, or infinity. Relies on `g` being
/// non-increasing.
fn first_zero(g: &TailBound) -> f64 {
    let mut hi = g.support_floor().max(0.0) + 1.0;
    while g.eval(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.eval(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Evaluates delay tail bounds for one configuration.
pub struct HybridModel {
    cfg: HybridConfig,
    cell: CellularBranch,
    mm: MmWaveModel,
    mm_lambda: f64,
}

impl HybridModel {
    pub fn new(cfg: HybridConfig) -> Result<Self> {
        cfg.validate()?;
        let cell = build_cellular(&cfg.cellular_branch((1.0 - cfg.split) * cfg.lambda_total))?;
        let mm = MmWaveModel::new(cfg.mmwave.clone())?;
        let mm_lambda = cfg.split * cfg.lambda_total;
        Ok(Self { cfg, cell, mm, mm_lambda })
    }

    pub fn config(&self) -> &HybridConfig {
        &self.cfg
    }

    /// Rate of the cellular branch in packets per slot.
    pub fn cellular_rate(&self) -> f64 {
        self.cell.rate
    }

    /// Bound at one `θ`, or `None` if the mmWave branch is unstable there.
    pub fn ccdf_at_theta(&self, delay: f64, theta: f64) -> Option<f64> {
        let p = &self.cfg.mmwave;
        let (r2, mm_bound) = if self.mm_lambda == 0.0 {
            (0.0, None)
        } else {
            let arrival = flow_arrival(p, self.mm_lambda, theta).ok()?;
            let b = self.mm.service_bound(&arrival).ok()?;
            (arrival.rho() / p.packet_nats, Some(b))
        };
        let x = (self.cell.rate + r2) * delay;
        let y = match self.cfg.argument {
            ArgumentMode::Full => x,
            ArgumentMode::Half => 0.5 * x,
        };
        let Some(b) = mm_bound else {
            return Some(self.cell.deficit.eval(y));
        };
        // mmWave deficit tail in packets: its delay bound at u / R₂ whole slots.
        // The law lives on multiples of R₂, so one sum with cells centred there
        // is exact and no refinement is needed.
        let g2 = |w: i64| {
            if w < 0 {
                return 1.0;
            }
            b.ln_delay_bound(w as u64).map(|l| l.exp().min(1.0)).unwrap_or(1.0)
        };
        let g1 = &self.cell.deficit;
        // Atoms past y meet g₁ at a negative argument, where it is 1. Atoms
        // at or below y - zero_from meet g₁ where it is 0.
        let last = (y / r2).floor();
        let first = ((y - self.cell.zero_from) / r2).floor().max(0.0).min(last);
        let cdf = |z: f64| if z < 0.0 { 0.0 } else { 1.0 - g2((z / r2).floor() as i64) };
        let inner = stieltjes_sum(|u| g1.eval(u), cdf, y, r2, first * r2, last * r2, 1.0);
        Some((inner + g2(last as i64)).min(1.0))
    }

    /// Hybrid bound with `θ` optimised for this delay.
    pub fn hybrid_ccdf(&self, delay: f64) -> Result<DelayEstimate> {
        if delay <= 0.0 {
            return Ok(DelayEstimate { x: delay, probability: 1.0, theta: f64::NAN });
        }
        if self.mm_lambda == 0.0 {
            let p = self.ccdf_at_theta(delay, self.cfg.mmwave.theta).unwrap_or(1.0);
            return Ok(DelayEstimate { x: delay, probability: p, theta: f64::NAN });
        }
        let p = &self.cfg.mmwave;
        let (theta, ln) = minimize_log_grid(
            |t| self.ccdf_at_theta(delay, t).map(|v| v.max(f64::MIN_POSITIVE).ln()),
            p.theta_min,
            p.theta_max,
            self.cfg.theta_points,
        )?;
        Ok(DelayEstimate { x: delay, probability: ln.exp().min(1.0), theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub x: f64,
    pub probability: f64,
    /// `θ` used, NaN when the bound does not depend on it.
    pub theta: f64,
}

/// Evaluates one channel's bound along a grid.
pub struct ChannelBound {
    channel: Channel,
    cellular: Option<(BackoffParams, crate::cellular::CellularMetrics)>,
    mmwave: Option<(MmWaveModel, f64)>,
    hybrid: Option<HybridModel>,
}

impl ChannelBound {
    pub fn new(cfg: &HybridConfig, channel: Channel) -> Result<Self> {
        cfg.validate()?;
        let mut out = Self { channel, cellular: None, mmwave: None, hybrid: None };
        match channel {
            Channel::Cellular => {
                let p = cfg.cellular_branch(cfg.lambda_total);
                let m = cellular_metrics(&p)?;
                out.cellular = Some((p, m));
            }
            Channel::Mmwave => out.mmwave = Some((MmWaveModel::new(cfg.mmwave.clone())?, cfg.lambda_total)),
            Channel::Hybrid => out.hybrid = Some(HybridModel::new(cfg.clone())?),
        }
        Ok(out)
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn ccdf(&self, x: f64) -> Result<DelayEstimate> {
        if let Some((p, m)) = &self.cellular {
            let probability = crate::cellular::cellular_delay_ccdf_with(p, m, x)?;
            return Ok(DelayEstimate { x, probability, theta: f64::NAN });
        }
        if let Some((model, lambda)) = &self.mmwave {
            let a = flow_arrival(model.params(), *lambda, model.params().theta)?;
            let d = model.delay_ccdf(&a, x)?;
            return Ok(DelayEstimate { x, probability: d.probability, theta: d.theta });
        }
        self.hybrid.as_ref().expect("one branch is always set").hybrid_ccdf(x)
    }

    pub fn ccdf_grid(&self, xs: &[f64]) -> Result<Vec<DelayEstimate>> {
        xs.iter().map(|&x| self.ccdf(x)).collect()
    }

    /// Smallest delay whose bound is at most `p`.
    pub fn quantile(&self, p: f64, max_x: f64) -> Result<f64> {
        quantile_search(|x| self.ccdf(x).map(|d| d.probability), p, max_x, true)
    }
}

pub fn hybrid_delay_ccdf(cfg: &HybridConfig, x: f64) -> Result<f64> {
    Ok(HybridModel::new(cfg.clone())?.hybrid_ccdf(x)?.probability)
}

/// Smallest `x` with `f(x) <= p` for a non-increasing `f`, by doubling then
/// bisection. With `whole` the answer is an integer.
pub fn quantile_search(f: impl Fn(f64) -> Result<f64>, p: f64, max_x: f64, whole: bool) -> Result<f64> {
    if f(0.0)? <= p {
        return Ok(0.0);
    }
    let mut hi = 1.0f64;
    while f(hi)? > p {
        if hi >= max_x {
            return Err(Error::NotReached { p, at_max: max_x });
        }
        hi = (hi * 2.0).min(max_x);
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    let done = |lo: f64, hi: f64| if whole { hi - lo <= 1.0 } else { hi - lo <= 1e-9 * hi };
    while !done(lo, hi) {
        let mid = if whole { ((lo + hi) / 2.0).floor() } else { 0.5 * (lo + hi) };
        if f(mid)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Mean delay from a tail bound sampled on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDelay {
    pub mean: f64,
    /// Bound left at the last grid point.
    pub tail_mass: f64,
    /// Set when `tail_mass > 1e-3`; the mean is then an under-estimate.
    pub truncated: bool,
}

/// `∫₀^∞ CCDF` by the trapezoid rule, with `CCDF(0) = 1` prepended.
pub fn mean_from_ccdf(xs: &[f64], ps: &[f64]) -> MeanDelay {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 1);
    if xs.first().is_none_or(|&x| x > 0.0) {
        pts.push((0.0, 1.0));
    }
    pts.extend(xs.iter().cloned().zip(ps.iter().cloned()));
    let mean = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    let tail_mass = pts.last().map_or(1.0, |p| p.1);
    MeanDelay { mean, tail_mass, truncated: tail_mass > 1e-3 }
}

/// Mean delay bound of one channel over the configured grid.
pub fn average_delay(cfg: &HybridConfig, channel: Channel) -> Result<MeanDelay> {
    let bound = ChannelBound::new(cfg, channel)?;
    let xs = cfg.grid.xs();
    let ps: Vec<f64> = bound.ccdf_grid(&xs)?.iter().map(|d| d.probability).collect();
    Ok(mean_from_ccdf(&xs, &ps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub x: f64,
    pub ccdf_cellular: f64,
    pub ccdf_mmwave: f64,
    pub ccdf_hybrid: f64,
}

/// All three bounds on the configured grid. A channel that is unstable at its
/// load reports 1.
pub fn ccdf_table(cfg: &HybridConfig) -> Result<Vec<CcdfRow>> {
    let xs = cfg.grid.xs();
    let column = |c: Channel| -> Result<Vec<f64>> {
        match ChannelBound::new(cfg, c) {
            Ok(b) => Ok(b.ccdf_grid(&xs)?.iter().map(|d| d.probability).collect()),
            Err(Error::UnstableQueue { .. } | Error::UnstableRegime { .. } | Error::EmptyStabilityRegion) => {
                Ok(vec![1.0; xs.len()])
            }
            Err(e) => Err(e),
        }
    };
    let (c, m, h) = (column(Channel::Cellular)?, column(Channel::Mmwave)?, column(Channel::Hybrid)?);
    Ok((0..xs.len())
        .map(|i| CcdfRow { x: xs[i], ccdf_cellular: c[i], ccdf_mmwave: m[i], ccdf_hybrid: h[i] })
        .collect())
}

pub fn write_ccdf_csv(rows: &[CcdfRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "x,ccdf_cellular,ccdf_mmwave,ccdf_hybrid")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e},{:e}", r.x, r.ccdf_cellular, r.ccdf_mmwave, r.ccdf_hybrid)?;
    }
    Ok(())
}
