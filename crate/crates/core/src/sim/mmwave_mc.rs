//! Fluid slot-level simulation of the mmWave relay chain.
//!
//! Hop `h` receives at node `h + 1`; its capacity in a slot is `ln(1 + γ)`
//! nats with an independent log-normal shadowing draw. Relay receivers are
//! damped by self-interference, the destination is not. Buffers are
//! unbounded and served FIFO.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmwave::{link_sinr_with_shadowing, MmWaveParams};

use super::empirical::EmpiricalCcdf;

/// When data served by one hop becomes available to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forwarding {
    /// In the same slot.
    #[default]
    CutThrough,
    /// In the following slot.
    StoreAndForward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmWaveMcConfig {
    /// Packets per slot offered by each upstream vehicle.
    pub lambda: f64,
    pub packets: usize,
    pub warmup: usize,
    pub forwarding: Forwarding,
    /// Replaces the random per-hop capacity when set.
    pub fixed_capacity: Option<f64>,
    pub seed: u64,
}

impl Default for MmWaveMcConfig {
    fn default() -> Self {
        Self { lambda: crate::presets::per_slot(0.1), packets: 10_000, warmup: 200, forwarding: Forwarding::CutThrough, fixed_capacity: None, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmWaveMcResult {
    /// End-to-end delay in slots: departure slot minus arrival slot.
    pub delays: EmpiricalCcdf,
    /// Mean per-slot capacity of each hop, in nats.
    pub mean_capacity: Vec<f64>,
    pub slots: u64,
}

/// The chain is fed by `n - 1` Poisson sources at `lambda` each, all
/// entering at the first hop.
pub fn simulate_mmwave_mc(p: &MmWaveParams, cfg: &MmWaveMcConfig) -> Result<MmWaveMcResult> {
    p.validate()?;
    let hops = (p.n_vehicles - 1) as usize;
    let rate = cfg.lambda * hops as f64;
    let mut out = MmWaveMcResult { delays: EmpiricalCcdf::default(), mean_capacity: vec![0.0; hops], slots: 0 };
    if rate == 0.0 || cfg.packets == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arrivals = Poisson::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let shadow = Normal::new(0.0, p.v).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let size = p.packet_nats;
    let mut backlog = vec![0.0f64; hops];
    let mut cap = vec![0.0f64; hops];
    // Cumulative nats offered, and per packet (arrival slot, cumulative end).
    let mut offered = 0.0f64;
    let mut delivered = 0.0f64;
    let mut pending: std::collections::VecDeque<(u64, f64)> = Default::default();
    let total = cfg.packets + cfg.warmup;
    let mut seen = 0usize;
    let mut delays = Vec::with_capacity(cfg.packets);
    let mut slot = 0u64;
    while seen < total {
        // Arrivals at the end of slot t are served from slot t + 1 on.
        let k = arrivals.sample(&mut rng) as u64;
        slot += 1;
        for h in 0..hops {
            cap[h] = match cfg.fixed_capacity {
                Some(c) => c,
                None => {
                    let xi = shadow.sample(&mut rng);
                    link_sinr_with_shadowing(p, (h + 2) as u32, xi).1.ln_1p()
                }
            };
            out.mean_capacity[h] += cap[h];
        }
        let mut inflow = 0.0;
        for h in 0..hops {
            let served = match cfg.forwarding {
                Forwarding::CutThrough => {
                    backlog[h] += inflow;
                    let s = backlog[h].min(cap[h]);
                    backlog[h] -= s;
                    s
                }
                Forwarding::StoreAndForward => {
                    let s = backlog[h].min(cap[h]);
                    backlog[h] += inflow - s;
                    s
                }
            };
            inflow = served;
        }
        delivered += inflow;
        while let Some(&(t, end)) = pending.front() {
            // Tolerance absorbs rounding in the running sums.
            if delivered + 1e-9 * end.max(1.0) < end {
                break;
            }
            pending.pop_front();
            seen += 1;
            if seen > cfg.warmup {
                delays.push((slot - t) as f64);
            }
        }
        for _ in 0..k {
            offered += size;
            pending.push_back((slot, offered));
        }
        backlog[0] += k as f64 * size;
        if pending.len() > 10_000_000 {
            return Err(Error::UnstableSystem { arrival: rate * size, service: out.mean_capacity[0] / slot as f64 });
        }
    }
    delays.truncate(cfg.packets);
    for c in out.mean_capacity.iter_mut() {
        *c /= slot as f64;
    }
    out.slots = slot;
    out.delays = EmpiricalCcdf::new(delays);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MmWaveParams {
        MmWaveParams::default().with_n(5)
    }

    #[test]
    fn uncongested_store_and_forward_is_pipeline_latency() {
        let cfg = MmWaveMcConfig {
            lambda: 1e-3,
            packets: 300,
            warmup: 0,
            forwarding: Forwarding::StoreAndForward,
            fixed_capacity: Some(1e6),
            seed: 3,
        };
        let r = simulate_mmwave_mc(&params(), &cfg).unwrap();
        assert!(r.delays.samples().iter().all(|&d| d == 4.0));
    }

    #[test]
    fn uncongested_cut_through_takes_one_slot() {
        let cfg = MmWaveMcConfig { lambda: 1e-3, packets: 300, warmup: 0, fixed_capacity: Some(1e6), seed: 3, ..Default::default() };
        let r = simulate_mmwave_mc(&params(), &cfg).unwrap();
        assert!(r.delays.samples().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn destination_hop_is_faster_than_relay_hops() {
        let cfg = MmWaveMcConfig { packets: 500, ..Default::default() };
        let r = simulate_mmwave_mc(&params(), &cfg).unwrap();
        let last = *r.mean_capacity.last().unwrap();
        assert!(r.mean_capacity[..3].iter().all(|&c| c < last));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = MmWaveMcConfig { packets: 400, ..Default::default() };
        assert_eq!(simulate_mmwave_mc(&params(), &cfg).unwrap(), simulate_mmwave_mc(&params(), &cfg).unwrap());
    }
}
