//! Delay-aware distance control for platoon followers.
//!
//! Each follower turns a delay bound into a safe distance, compares it with
//! its gap to the predecessor, and picks one of three accelerations with a
//! hysteresis band between two multiples of the safe distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{ChannelEstimate, ParameterPredictor};
use crate::surrogate::{predict_delay, DelayQuery, Prediction, SurrogateModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Front bumper along the lane, meters.
    pub position: f64,
    pub speed: f64,
    /// Braking magnitude, m/s².
    pub a_max_brake: f64,
    pub a_max_accel: f64,
    pub length: f64,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self { position: 0.0, speed: 0.0, a_max_brake: 6.0, a_max_accel: 2.0, length: 4.5 }
    }
}

impl VehicleState {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0) || !(self.a_max_brake > 0.0) || !(self.a_max_accel > 0.0) || !(self.length >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad vehicle state {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub k1: f64,
    pub k2: f64,
    /// Command above the band, m/s².
    pub accel: f64,
    /// Command below the band, m/s² (negative).
    pub decel: f64,
    /// Timeout probability the delay bound is taken at.
    pub p: f64,
    /// Prediction horizon in predictor steps.
    pub horizon: usize,
    /// Seconds between control steps.
    pub control_period: f64,
    /// Predecessor data older than this many periods triggers braking.
    pub staleness_periods: f64,
    /// Seconds per slot, for converting delay bounds.
    pub slot_duration: f64,
    /// Share of traffic on mmWave in delay queries.
    pub split: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            k1: 1.05,
            k2: 1.1,
            accel: 1.0,
            decel: -1.0,
            p: 0.01,
            horizon: 5,
            control_period: 0.01,
            staleness_periods: 3.0,
            slot_duration: crate::presets::SLOT_DURATION,
            split: 0.5,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k2 > self.k1
            && self.k1 > 1.0
            && self.accel > 0.0
            && self.decel < 0.0
            && self.p > 0.0
            && self.p < 1.0
            && self.horizon >= 1
            && self.control_period > 0.0
            && self.staleness_periods > 0.0
            && self.slot_duration > 0.0
            && (0.0..=1.0).contains(&self.split);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid control config {self:?}")))
        }
    }

    pub fn staleness_cap(&self) -> f64 {
        self.staleness_periods * self.control_period
    }
}

/// `S = v_f²/(2 b_f) + D v_f - v_l²/(2 b_l)`, never negative.
pub fn safe_distance(follower: &VehicleState, leader: &VehicleState, delay: f64) -> f64 {
    let stop_f = follower.speed * follower.speed / (2.0 * follower.a_max_brake);
    let stop_l = leader.speed * leader.speed / (2.0 * leader.a_max_brake);
    (stop_f + delay * follower.speed - stop_l).max(0.0)
}

/// Brakes at or below `k1 S`, coasts up to and including `k2 S`, else
/// accelerates.
pub fn map_acceleration(gap: f64, s: f64, cfg: &ControlConfig) -> f64 {
    if gap <= cfg.k1 * s {
        cfg.decel
    } else if gap <= cfg.k2 * s {
        0.0
    } else {
        cfg.accel
    }
}

/// Source of delay bounds in slots.
pub trait DelayBound {
    fn delay_slots(&self, q: &DelayQuery) -> Result<Prediction>;
}

impl DelayBound for SurrogateModel {
    fn delay_slots(&self, q: &DelayQuery) -> Result<Prediction> {
        q.validate()?;
        Ok(predict_delay(self, q))
    }
}

impl<F: Fn(&DelayQuery) -> f64> DelayBound for F {
    fn delay_slots(&self, q: &DelayQuery) -> Result<Prediction> {
        Ok(Prediction { delay_slots: self(q), extrapolated: false })
    }
}

/// A state broadcast by the predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub state: VehicleState,
    /// Acceleration the sender was applying.
    pub accel: f64,
    pub sent_at: f64,
}

impl Message {
    /// Sender state `age` seconds after sending, assuming it kept its
    /// acceleration and did not reverse.
    pub fn extrapolate(&self, age: f64) -> VehicleState {
        let v = self.state.speed;
        let a = self.accel;
        let tau = if a < 0.0 { age.min(v / -a) } else { age };
        let mut s = self.state;
        s.position += v * tau + 0.5 * a * tau * tau;
        s.speed = (v + a * tau).max(0.0);
        if tau < age {
            s.speed = 0.0;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub now: f64,
    pub own: VehicleState,
    /// `None` for the lead vehicle.
    pub predecessor: Option<Option<Message>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub command: f64,
    pub gap: f64,
    pub safe_distance: f64,
    /// Delay bound in seconds.
    pub delay: f64,
    pub extrapolated: bool,
    pub stale: bool,
}

/// One control decision. The lead holds its speed. A follower with no
/// predecessor data, or data older than the staleness cap, brakes.
/// Otherwise the channel estimate (the worst case over the horizon when a
/// predictor is given) is turned into a delay bound and a safe distance.
pub fn control_step(
    input: &ControlInput,
    history: &[ChannelEstimate],
    predictor: Option<&ParameterPredictor>,
    delay: &impl DelayBound,
    cfg: &ControlConfig,
) -> Result<ControlOutput> {
    let msg = match input.predecessor {
        None => return Ok(ControlOutput { command: 0.0, gap: f64::INFINITY, safe_distance: 0.0, delay: 0.0, extrapolated: false, stale: false }),
        Some(m) => m,
    };
    let estimate = predictor
        .and_then(|p| p.worst_case(history))
        .or_else(|| history.last().copied())
        .ok_or_else(|| Error::InvalidParameter("no channel parameters observed".into()))?;
    let query = DelayQuery { p: cfg.p, lambda: estimate.lambda, n: estimate.n.round().max(2.0) as u32, noise_level: estimate.noise_level, split: cfg.split };
    let pred = delay.delay_slots(&query)?;
    let d = pred.delay_slots * cfg.slot_duration;
    let fresh = msg.filter(|m| input.now - m.sent_at <= cfg.staleness_cap() + 1e-9);
    let Some(m) = fresh else {
        return Ok(ControlOutput { command: cfg.decel, gap: f64::NAN, safe_distance: f64::NAN, delay: d, extrapolated: pred.extrapolated, stale: true });
    };
    let lead = m.extrapolate(input.now - m.sent_at);
    let gap = lead.position - lead.length - input.own.position;
    let s = safe_distance(&input.own, &lead, d);
    Ok(ControlOutput { command: map_acceleration(gap, s, cfg), gap, safe_distance: s, delay: d, extrapolated: pred.extrapolated, stale: false })
}
