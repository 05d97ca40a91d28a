//! Discrete-time platoon simulation.
//!
//! Every tick each vehicle broadcasts its state to its follower over the
//! cellular channel. Message delays are drawn from the cellular Monte Carlo
//! delay distribution of the current channel regime, so followers act on
//! stale, dead-reckoned predecessor states. Channel parameters follow
//! independent Markov chains whose level values depend on the regime.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellular::BackoffParams;
use crate::control::{control_step, ControlConfig, ControlInput, DelayBound, Message, VehicleState};
use crate::error::{Error, Result};
use crate::predictor::{ChannelEstimate, MarkovConfig, ParameterPredictor, PredictorHyper};
use crate::presets::per_slot;

use super::cellular_mc::simulate_cellular_mc;
use super::empirical::EmpiricalCcdf;

pub const TRACE_HEADER: &str = "t,vehicle,position,speed,gap,safe_distance,delay_bound,command,message_age";

/// Level values of each channel parameter; index `i` is chain state `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub noise_level: Vec<f64>,
    pub n: Vec<f64>,
    /// Packets per slot per vehicle.
    pub lambda: Vec<f64>,
}

impl Regime {
    pub fn nominal() -> Self {
        Self { noise_level: vec![0.0, 0.5, 1.0], n: vec![6.0, 7.0, 8.0], lambda: [0.05, 0.075, 0.1].map(per_slot).to_vec() }
    }

    pub fn degraded() -> Self {
        Self { noise_level: vec![2.0, 2.5, 3.0], n: vec![6.0, 7.0, 8.0], lambda: [0.2, 0.25, 0.3].map(per_slot).to_vec() }
    }

    fn at(&self, levels: [usize; 3]) -> ChannelEstimate {
        ChannelEstimate { noise_level: self.noise_level[levels[0]], n: self.n[levels[1]], lambda: self.lambda[levels[2]] }
    }

    fn columns(&self) -> [&[f64]; 3] {
        [&self.noise_level, &self.n, &self.lambda]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Switches the channel regime.
    Degrade { regime: Regime },
    /// The lead brakes at its limit until it stops and broadcasts a brake
    /// message to every follower.
    LeadBrake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Intelligent,
    Baseline,
}

/// Constant time-headway follower gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub k_v: f64,
    pub k_g: f64,
    /// Seconds.
    pub headway: f64,
    /// Meters at standstill.
    pub standstill: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { k_v: 0.6, k_g: 0.15, headway: 1.5, standstill: 2.0 }
    }
}

/// `a = k_v (v_lead - v) + k_g (gap - h v - g0)`, clipped to the vehicle's
/// limits.
pub fn baseline_follower(gap: f64, speed: f64, lead_speed: f64, cfg: &BaselineConfig, vehicle: &VehicleState) -> f64 {
    let a = cfg.k_v * (lead_speed - speed) + cfg.k_g * (gap - cfg.headway * speed - cfg.standstill);
    a.clamp(-vehicle.a_max_brake, vehicle.a_max_accel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub vehicle_count: usize,
    /// Bumper-to-bumper meters.
    pub initial_gap: f64,
    pub initial_speed: f64,
    /// Speed no vehicle exceeds; `None` means the initial speed.
    pub speed_limit: Option<f64>,
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub vehicle: VehicleState,
    pub control: ControlConfig,
    pub controller: ControllerKind,
    pub baseline: BaselineConfig,
    pub prediction: bool,
    pub regime: Regime,
    /// Row-stochastic matrix shared by the three parameter chains.
    pub transition: Vec<Vec<f64>>,
    /// Seconds between parameter changes (one predictor step).
    pub parameter_period: f64,
    pub events: Vec<ScenarioEvent>,
    /// Packets simulated per channel state for the delay distribution.
    pub mc_packets: usize,
    /// Fixed message delay in seconds instead of sampled ones.
    pub fixed_delay: Option<f64>,
    /// Command changes smaller than this are not speed changes.
    pub command_tolerance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            vehicle_count: 6,
            initial_gap: 10.0,
            initial_speed: 7.5,
            speed_limit: None,
            duration: 60.0,
            tick: 0.01,
            seed: 1,
            vehicle: VehicleState::default(),
            control: ControlConfig::default(),
            controller: ControllerKind::Intelligent,
            baseline: BaselineConfig::default(),
            prediction: true,
            regime: Regime::nominal(),
            transition: vec![vec![0.6, 0.3, 0.1], vec![0.25, 0.5, 0.25], vec![0.1, 0.3, 0.6]],
            parameter_period: 1.0,
            events: Vec::new(),
            mc_packets: 4000,
            fixed_delay: None,
            command_tolerance: 1e-3,
        }
    }
}

/// Seconds per slot in [`ScenarioConfig::degradation`]. With it the degraded
/// worst-case bound at `p = 0.01` (about 1170 slots) gives a safe distance
/// near 11.5 m at 7.5 m/s.
pub const CALIBRATED_SLOT_DURATION: f64 = 1.31e-3;

impl ScenarioConfig {
    /// Six vehicles at 10 m and 7.5 m/s; the channel degrades at `t = 0`.
    pub fn degradation() -> Self {
        let control = ControlConfig {
            k1: 1.02,
            k2: 1.06,
            accel: 2.0,
            decel: -2.0,
            control_period: 0.05,
            slot_duration: CALIBRATED_SLOT_DURATION,
            ..Default::default()
        };
        Self {
            tick: control.control_period,
            control,
            events: vec![ScenarioEvent { time: 0.0, kind: EventKind::Degrade { regime: Regime::degraded() } }],
            ..Default::default()
        }
    }

    /// [`Self::degradation`] followed by a lead brake at `at` seconds.
    pub fn urgent_brake(at: f64) -> Self {
        let mut s = Self::degradation();
        s.events.push(ScenarioEvent { time: at, kind: EventKind::LeadBrake });
        s.duration = s.duration.max(at + 10.0);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.vehicle_count < 2 {
            return bad("vehicle_count must be at least 2");
        }
        if !(self.initial_gap > 0.0) || !(self.initial_speed >= 0.0) || !(self.tick > 0.0) || !(self.duration > 0.0) {
            return bad("gap and tick must be positive, speed and duration non-negative");
        }
        if !(self.parameter_period >= self.tick) {
            return bad("parameter_period must be at least one tick");
        }
        self.vehicle.validate()?;
        self.control.validate()?;
        let k = self.transition.len();
        if k == 0 || self.transition.iter().any(|r| r.len() != k || r.iter().any(|&p| !(p >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9) {
            return bad("transition must be a square row-stochastic matrix");
        }
        let regimes = std::iter::once(&self.regime).chain(self.events.iter().filter_map(|e| match &e.kind {
            EventKind::Degrade { regime } => Some(regime),
            EventKind::LeadBrake => None,
        }));
        for r in regimes {
            if r.columns().iter().any(|c| c.len() != k) {
                return bad("every regime needs one value per chain state");
            }
        }
        Ok(())
    }

    fn speed_limit(&self) -> f64 {
        self.speed_limit.unwrap_or(self.initial_speed)
    }
}

fn step_chain(rng: &mut ChaCha8Rng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

/// Bin edges halfway between sorted values, padded by half a spacing.
fn edges_around(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() < 2 {
        let x = v.first().copied().unwrap_or(0.0);
        return vec![x - 0.5, x + 0.5, x + 1.5];
    }
    let mut e = vec![v[0] - 0.5 * (v[1] - v[0])];
    e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let l = v.len();
    e.push(v[l - 1] + 0.5 * (v[l - 1] - v[l - 2]));
    e
}

/// Samples `steps` parameter vectors in `regime` and fits one order-2 chain
/// per parameter, binned around the regime's level values.
pub fn train_scenario_predictor(cfg: &ScenarioConfig, regime: &Regime, steps: usize, seed: u64) -> Result<ParameterPredictor> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = [0usize; 3];
    let samples: Vec<ChannelEstimate> = (0..steps)
        .map(|_| {
            for l in levels.iter_mut() {
                *l = step_chain(&mut rng, &cfg.transition[*l]);
            }
            regime.at(levels)
        })
        .collect();
    let mk = |values: &[f64]| MarkovConfig { order: 2, bin_edges: edges_around(values), horizon: cfg.control.horizon, ..Default::default() };
    let [a, b, c] = regime.columns();
    ParameterPredictor::fit(&samples, [mk(a), mk(b), mk(c)], &PredictorHyper::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub vehicle: usize,
    pub position: f64,
    pub speed: f64,
    /// True bumper-to-bumper gap to the predecessor; NaN for the lead.
    pub gap: f64,
    /// NaN when the controller did not compute one.
    pub safe_distance: f64,
    /// Delay bound in seconds.
    pub delay_bound: f64,
    pub command: f64,
    /// Age of the newest usable predecessor message, seconds.
    pub message_age: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub tick: f64,
    pub vehicle_count: usize,
    /// Ticks in order, vehicles in order within a tick.
    pub rows: Vec<TraceRow>,
    pub collision: bool,
    /// Delay queries answered outside the surrogate's training box.
    pub extrapolations: usize,
    pub lead_brake_at: Option<f64>,
    /// Every sampled message delay, seconds.
    pub message_delays: Vec<f64>,
}

impl SimTrace {
    pub fn ticks(&self) -> usize {
        self.rows.len() / self.vehicle_count.max(1)
    }

    pub fn tick_rows(&self, k: usize) -> &[TraceRow] {
        &self.rows[k * self.vehicle_count..(k + 1) * self.vehicle_count]
    }
}

pub fn write_trace_csv(trace: &SimTrace, mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let f = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.vehicle,
            r.position,
            r.speed,
            f(r.gap),
            f(r.safe_distance),
            f(r.delay_bound),
            r.command,
            f(r.message_age)
        )?;
    }
    Ok(())
}

/// Empirical cellular delays in slots, one Monte Carlo run per channel state.
struct DelaySampler {
    base: BackoffParams,
    split: f64,
    packets: usize,
    seed: u64,
    cache: HashMap<(u32, u64), EmpiricalCcdf>,
}

impl DelaySampler {
    fn sample(&mut self, ch: &ChannelEstimate, rng: &mut ChaCha8Rng) -> Result<f64> {
        let n = ch.n.round().max(1.0) as u32;
        let lambda = (1.0 - self.split) * ch.lambda;
        let key = (n, lambda.to_bits());
        if !self.cache.contains_key(&key) {
            let mut p = self.base.clone().with_lambda(lambda);
            p.n = n;
            let seed = self.seed ^ (u64::from(n) << 48) ^ lambda.to_bits();
            let r = simulate_cellular_mc(&p, self.packets, self.packets / 20, seed)?;
            self.cache.insert(key, r.delays);
        }
        let s = self.cache[&key].samples();
        Ok(if s.is_empty() { 1.0 } else { s[rng.random_range(0..s.len())] })
    }
}

struct InFlight {
    deliver_at: f64,
    msg: Message,
}

/// Runs the scenario with the given delay bound and optional predictor.
pub fn run_platoon_scenario(cfg: &ScenarioConfig, delay: &impl DelayBound, predictor: Option<&ParameterPredictor>) -> Result<SimTrace> {
    cfg.validate()?;
    let nv = cfg.vehicle_count;
    let dt = cfg.tick;
    let eps = 1e-9 * dt;
    let ticks = (cfg.duration / dt).round() as usize + 1;
    let limit = cfg.speed_limit();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = DelaySampler { base: crate::presets::backoff_defaults(), split: cfg.control.split, packets: cfg.mc_packets, seed: cfg.seed, cache: HashMap::new() };

    let mut vehicles: Vec<VehicleState> = (0..nv)
        .map(|i| VehicleState {
            position: -(i as f64) * (cfg.initial_gap + cfg.vehicle.length),
            speed: cfg.initial_speed,
            ..cfg.vehicle
        })
        .collect();
    // Followers start out knowing their predecessor's state at t = 0.
    let mut latest: Vec<Option<Message>> = (0..nv).map(|i| (i > 0).then(|| Message { state: vehicles[i - 1], accel: 0.0, sent_at: 0.0 })).collect();
    let mut in_flight: Vec<Vec<InFlight>> = (0..nv).map(|_| Vec::new()).collect();
    let mut brake_at: Vec<Option<f64>> = vec![None; nv];

    let mut regime = cfg.regime.clone();
    let mut levels = [0usize; 3];
    // A short run-in so the predictor has a full context at t = 0.
    let mut history: Vec<ChannelEstimate> = Vec::new();
    for _ in 0..4 {
        for l in levels.iter_mut() {
            *l = step_chain(&mut rng, &cfg.transition[*l]);
        }
        history.push(regime.at(levels));
    }
    let mut next_param = cfg.parameter_period;
    let mut events: Vec<&ScenarioEvent> = cfg.events.iter().collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_event = 0;
    let mut lead_braking = false;

    let mut trace = SimTrace { tick: dt, vehicle_count: nv, rows: Vec::with_capacity(ticks * nv), collision: false, extrapolations: 0, lead_brake_at: None, message_delays: Vec::new() };
    let mut commands = vec![0.0; nv];

    for k in 0..ticks {
        let t = k as f64 * dt;
        while next_event < events.len() && events[next_event].time <= t + eps {
            match &events[next_event].kind {
                EventKind::Degrade { regime: r } => {
                    regime = r.clone();
                    *history.last_mut().unwrap() = regime.at(levels);
                }
                EventKind::LeadBrake => {
                    lead_braking = true;
                    trace.lead_brake_at = Some(t);
                    let current = *history.last().unwrap();
                    for slot in brake_at.iter_mut().skip(1) {
                        let d = message_delay(cfg, &mut sampler, &current, &mut rng)?;
                        trace.message_delays.push(d);
                        *slot = Some(t + d);
                    }
                }
            }
            next_event += 1;
        }
        if t + eps >= next_param {
            for l in levels.iter_mut() {
                *l = step_chain(&mut rng, &cfg.transition[*l]);
            }
            history.push(regime.at(levels));
            next_param += cfg.parameter_period;
        }
        let current = *history.last().unwrap();

        for i in 1..nv {
            in_flight[i].retain(|m| {
                let usable = m.deliver_at <= t + eps && m.msg.sent_at < t - eps;
                if usable && latest[i].is_none_or(|l| l.sent_at < m.msg.sent_at) {
                    latest[i] = Some(m.msg);
                }
                !usable
            });
        }

        for i in 0..nv {
            let v = vehicles[i];
            let mut row = TraceRow { t, vehicle: i, position: v.position, speed: v.speed, gap: f64::NAN, safe_distance: f64::NAN, delay_bound: f64::NAN, command: 0.0, message_age: f64::NAN };
            if i == 0 {
                row.command = if lead_braking { -v.a_max_brake } else { 0.0 };
            } else {
                let pred = vehicles[i - 1];
                row.gap = pred.position - pred.length - v.position;
                if row.gap <= 0.0 {
                    trace.collision = true;
                }
                row.message_age = latest[i].map_or(f64::INFINITY, |m| t - m.sent_at);
                if brake_at[i].is_some_and(|b| b <= t + eps && b < f64::INFINITY) && trace.lead_brake_at.is_some_and(|e| e < t - eps) {
                    row.command = -v.a_max_brake;
                } else {
                    match cfg.controller {
                        ControllerKind::Intelligent => {
                            let input = ControlInput { now: t, own: v, predecessor: Some(latest[i]) };
                            let out = control_step(&input, &history, predictor.filter(|_| cfg.prediction), delay, &cfg.control)?;
                            trace.extrapolations += usize::from(out.extrapolated);
                            row.command = out.command;
                            row.safe_distance = out.safe_distance;
                            row.delay_bound = out.delay;
                        }
                        ControllerKind::Baseline => {
                            row.command = match latest[i].filter(|m| t - m.sent_at <= cfg.control.staleness_cap() + eps) {
                                None => cfg.control.decel,
                                Some(m) => {
                                    let lead = m.extrapolate(t - m.sent_at);
                                    baseline_follower(lead.position - lead.length - v.position, v.speed, lead.speed, &cfg.baseline, &v)
                                }
                            };
                        }
                    }
                }
            }
            commands[i] = row.command;
            trace.rows.push(row);
        }

        for i in 0..nv - 1 {
            let d = message_delay(cfg, &mut sampler, &current, &mut rng)?;
            trace.message_delays.push(d);
            in_flight[i + 1].push(InFlight { deliver_at: t + d, msg: Message { state: vehicles[i], accel: commands[i], sent_at: t } });
        }

        for (v, &a) in vehicles.iter_mut().zip(&commands) {
            let a = a.clamp(-v.a_max_brake, v.a_max_accel);
            let speed = (v.speed + a * dt).clamp(0.0, limit.max(v.speed));
            v.position += 0.5 * (v.speed + speed) * dt;
            v.speed = speed;
        }
    }
    Ok(trace)
}

fn message_delay(cfg: &ScenarioConfig, sampler: &mut DelaySampler, ch: &ChannelEstimate, rng: &mut ChaCha8Rng) -> Result<f64> {
    match cfg.fixed_delay {
        Some(d) => Ok(d),
        None => Ok(sampler.sample(ch, rng)? * cfg.control.slot_duration),
    }
}

/// Adds a lead brake at `at` seconds to `cfg` and runs it.
pub fn urgent_brake_scenario(cfg: &ScenarioConfig, at: f64, delay: &impl DelayBound, predictor: Option<&ParameterPredictor>) -> Result<SimTrace> {
    let mut c = cfg.clone();
    c.events.retain(|e| e.kind != EventKind::LeadBrake);
    c.events.push(ScenarioEvent { time: at, kind: EventKind::LeadBrake });
    c.duration = c.duration.max(at + 10.0);
    run_platoon_scenario(&c, delay, predictor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Vehicles whose command changed, per tick.
    pub speed_changes: Vec<usize>,
    /// Last change plus the dwell window; `0` if nothing ever changed and
    /// `None` if the trace ends before the dwell window does.
    pub convergence_time: Option<f64>,
    /// Mean follower gap per tick.
    pub average_gap: Vec<f64>,
    pub min_gap: f64,
    pub collision: bool,
    /// Seconds from the lead brake to each vehicle's first negative command.
    pub brake_onset: Vec<Option<f64>>,
    /// Speed changes at or after `stable_after`.
    pub stable_changes: usize,
    pub stable_mean_gap: f64,
    pub stable_mean_safe_distance: f64,
}

pub fn compute_metrics(trace: &SimTrace, tolerance: f64, dwell: f64, stable_after: f64) -> Metrics {
    let nv = trace.vehicle_count;
    let ticks = trace.ticks();
    let mut speed_changes = vec![0usize; ticks];
    let mut average_gap = vec![0.0; ticks];
    let mut min_gap = f64::INFINITY;
    let (mut gap_sum, mut s_sum, mut s_count, mut stable_ticks) = (0.0, 0.0, 0usize, 0usize);
    for k in 0..ticks {
        let rows = trace.tick_rows(k);
        if k > 0 {
            let prev = trace.tick_rows(k - 1);
            speed_changes[k] = rows.iter().zip(prev).filter(|(a, b)| (a.command - b.command).abs() > tolerance).count();
        }
        let gaps: Vec<f64> = rows[1..].iter().map(|r| r.gap).collect();
        average_gap[k] = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
        min_gap = gaps.iter().copied().fold(min_gap, f64::min);
        if rows[0].t >= stable_after - 1e-9 * trace.tick {
            stable_ticks += 1;
            gap_sum += average_gap[k];
            for r in &rows[1..] {
                if r.safe_distance.is_finite() {
                    s_sum += r.safe_distance;
                    s_count += 1;
                }
            }
        }
    }
    let end = (ticks.saturating_sub(1)) as f64 * trace.tick;
    let convergence_time = match speed_changes.iter().rposition(|&c| c > 0) {
        None => Some(0.0),
        Some(k) => Some(k as f64 * trace.tick + dwell).filter(|&c| c <= end + 1e-9),
    };
    let stable_changes = speed_changes.iter().enumerate().filter(|(k, _)| *k as f64 * trace.tick >= stable_after - 1e-9 * trace.tick).map(|(_, &c)| c).sum();
    let brake_onset = (0..nv)
        .map(|i| {
            let e = trace.lead_brake_at?;
            (0..ticks).map(|k| trace.tick_rows(k)[i]).find(|r| r.t >= e - 1e-9 && r.command < 0.0).map(|r| r.t - e)
        })
        .collect();
    Metrics {
        speed_changes,
        convergence_time,
        average_gap,
        min_gap,
        collision: trace.collision,
        brake_onset,
        stable_changes,
        stable_mean_gap: if stable_ticks > 0 { gap_sum / stable_ticks as f64 } else { f64::NAN },
        stable_mean_safe_distance: if s_count > 0 { s_sum / s_count as f64 } else { f64::NAN },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::DelayQuery;
    use approx::assert_abs_diff_eq;

    fn quiet() -> ScenarioConfig {
        ScenarioConfig { duration: 5.0, mc_packets: 500, ..Default::default() }
    }

    /// D = 0.5 s at 50 µs slots: S = 3.75 m, band (3.94, 4.13].
    fn half_second(_: &DelayQuery) -> f64 {
        10_000.0
    }

    #[test]
    fn baseline_rule() {
        let c = BaselineConfig::default();
        let v = VehicleState::default();
        let g = c.headway * 7.5 + c.standstill;
        assert_abs_diff_eq!(baseline_follower(g, 7.5, 7.5, &c, &v), 0.0, epsilon = 1e-12);
        assert!(baseline_follower(g - 1.0, 7.5, 7.5, &c, &v) < 0.0);
        assert_eq!(baseline_follower(-100.0, 7.5, 0.0, &c, &v), -v.a_max_brake);
    }

    #[test]
    fn equilibrium_has_no_speed_changes() {
        let cfg = ScenarioConfig { initial_gap: 4.0, ..quiet() };
        let tr = run_platoon_scenario(&cfg, &half_second, None).unwrap();
        let m = compute_metrics(&tr, cfg.command_tolerance, 1.0, 0.0);
        assert!(m.speed_changes.iter().all(|&c| c == 0));
        assert_eq!(m.convergence_time, Some(0.0));
        assert!(tr.rows.iter().all(|r| r.vehicle == 0 || r.command == 0.0));
        assert!(!m.collision);
    }

    #[test]
    fn kinematics_are_trapezoidal_and_ordered() {
        let cfg = ScenarioConfig { initial_gap: 3.0, ..quiet() };
        let tr = run_platoon_scenario(&cfg, &half_second, None).unwrap();
        for k in 1..tr.ticks() {
            for (a, b) in tr.tick_rows(k - 1).iter().zip(tr.tick_rows(k)) {
                assert!((b.position - a.position - 0.5 * (a.speed + b.speed) * tr.tick).abs() < 1e-9);
            }
            let rows = tr.tick_rows(k);
            assert!(rows.windows(2).all(|w| w[0].position > w[1].position));
        }
        let m = compute_metrics(&tr, cfg.command_tolerance, 1.0, 0.0);
        assert!(m.speed_changes.iter().any(|&c| c > 0));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ScenarioConfig { initial_gap: 3.0, ..quiet() };
        let a = run_platoon_scenario(&cfg, &half_second, None).unwrap();
        let b = run_platoon_scenario(&cfg, &half_second, None).unwrap();
        // NaN fields rule out `==`; the debug form is exact.
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_trace_csv(&a, &mut x).unwrap();
        write_trace_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_delay_brake_reaches_last_vehicle_next_tick() {
        let cfg = ScenarioConfig { initial_gap: 4.0, fixed_delay: Some(0.0), ..quiet() };
        let tr = urgent_brake_scenario(&cfg, 1.0, &half_second, None).unwrap();
        let m = compute_metrics(&tr, cfg.command_tolerance, 1.0, 0.0);
        assert_abs_diff_eq!(m.brake_onset[5].unwrap(), cfg.tick, epsilon = 1e-9);
        assert_eq!(m.brake_onset[0], Some(0.0));
    }

    #[test]
    fn huge_delay_engages_fail_safe() {
        // Nothing arrives after the t = 0 snapshot; its age passes the
        // 3-tick cap at tick 4.
        let cfg = ScenarioConfig { initial_gap: 4.0, fixed_delay: Some(5.0), duration: 0.2, ..quiet() };
        let tr = run_platoon_scenario(&cfg, &half_second, None).unwrap();
        for k in 0..tr.ticks() {
            let r = tr.tick_rows(k)[3];
            assert_eq!(r.command, if k <= 3 { 0.0 } else { cfg.control.decel }, "tick {k}");
        }
    }

    #[test]
    fn metrics_on_a_step() {
        let rows = |cmd: f64, k: usize| (0..2).map(move |v| TraceRow { t: k as f64 * 0.5, vehicle: v, position: -(v as f64) * 10.0, speed: 1.0, gap: if v == 0 { f64::NAN } else { 5.0 }, safe_distance: f64::NAN, delay_bound: f64::NAN, command: if v == 1 { cmd } else { 0.0 }, message_age: 0.0 });
        let mut all = Vec::new();
        for k in 0..20 {
            all.extend(rows(if k < 4 { 0.0 } else { 1.0 }, k));
        }
        let tr = SimTrace { tick: 0.5, vehicle_count: 2, rows: all, collision: false, extrapolations: 0, lead_brake_at: None, message_delays: vec![] };
        let m = compute_metrics(&tr, 1e-3, 2.0, 0.0);
        assert_eq!(m.convergence_time, Some(2.0 + 2.0));
        assert_eq!(m.speed_changes.iter().sum::<usize>(), 1);
        assert_eq!(m.average_gap[3], 5.0);
    }

    #[test]
    fn scenario_json_roundtrip() {
        let s = ScenarioConfig::urgent_brake(5.0);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&j).unwrap(), s);
        let partial: ScenarioConfig = serde_json::from_str(r#"{"vehicle_count": 3}"#).unwrap();
        assert_eq!(partial.vehicle_count, 3);
        assert!(ScenarioConfig { vehicle_count: 1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn edges_center_values() {
        let e = edges_around(&[2.0, 2.5, 3.0]);
        assert_eq!(e, vec![1.75, 2.25, 2.75, 3.25]);
    }
}
