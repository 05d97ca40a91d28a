//! Default scenario parameters.

use crate::cellular::{BackoffParams, MuDefinition, VarianceModel};
use crate::mmwave::{MmWaveParams, QhatVariable};

/// Figure-level arrival rates are quoted per this many slots.
pub const RATE_UNIT_SLOTS: f64 = 100.0;

/// Converts a rate quoted per [`RATE_UNIT_SLOTS`] into packets per slot.
pub fn per_slot(rate: f64) -> f64 {
    rate / RATE_UNIT_SLOTS
}

/// Seconds per slot.
pub const SLOT_DURATION: f64 = 50e-6;

pub fn backoff_defaults() -> BackoffParams {
    BackoffParams {
        w: 4,
        m: 3,
        max_stage: 5,
        n: 10,
        t_s: 10.0,
        t_c: 5.0,
        t_tx: 10.0,
        queue_len: 100,
        lambda: per_slot(0.1),
        slot_duration: SLOT_DURATION,
        mu_def: MuDefinition::Half,
        variance: VarianceModel::StageSum,
    }
}

pub fn mmwave_defaults() -> MmWaveParams {
    MmWaveParams {
        alpha_fit: 0.0,
        beta_fit: 2.0,
        v: 5.8,
        mu_si: 0.01,
        snr: 100.0,
        kappa: 1.0,
        n_vehicles: 10,
        link_length: 5.0,
        delta: 1e-2,
        theta: 0.05,
        packet_nats: 20.0,
        qhat_variable: QhatVariable::Sinr,
        theta_min: 1e-4,
        theta_max: 5.0,
        theta_points: 120,
    }
}
