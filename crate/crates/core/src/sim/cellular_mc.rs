//! Slot-level simulation of the contention channel.
//!
//! Every station holds a FIFO queue of at most `L` packets. The head packet
//! draws a counter uniform on `[0, CW_j]` for its stage `j`; counters count
//! down in idle slots and freeze while the medium is busy. A lone transmitter
//! occupies the medium for `t_s` slots and its packet leaves. Two or more
//! transmitters collide for `t_c` slots; each moves to the next stage, and a
//! collision at the last stage ends the packet's service without delivery.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cellular::{contention_windows, BackoffParams};
use crate::error::Result;

use super::empirical::EmpiricalCcdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellularMcResult {
    /// Per-packet delay from arrival to the end of service, in slots.
    pub delays: EmpiricalCcdf,
    pub delivered: u64,
    /// Packets whose last-stage attempt collided.
    pub lost: u64,
    /// Packets refused by a full queue.
    pub overflow: u64,
    pub collisions: u64,
    pub successes: u64,
    pub slots: f64,
}

impl CellularMcResult {
    /// Fraction of transmissions that collided.
    pub fn collision_share(&self) -> f64 {
        let tx = self.successes + self.collisions;
        if tx == 0 {
            0.0
        } else {
            self.collisions as f64 / tx as f64
        }
    }
}

struct Station {
    queue: VecDeque<f64>,
    next_arrival: f64,
    stage: usize,
    counter: Option<u64>,
}

/// Simulates until `packets` delays are recorded (the first `warmup`
/// completions are discarded).
pub fn simulate_cellular_mc(p: &BackoffParams, packets: usize, warmup: usize, seed: u64) -> Result<CellularMcResult> {
    p.validate()?;
    let (cw, _, _) = contention_windows(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CellularMcResult {
        delays: EmpiricalCcdf::default(),
        delivered: 0,
        lost: 0,
        overflow: 0,
        collisions: 0,
        successes: 0,
        slots: 0.0,
    };
    if p.lambda == 0.0 || packets == 0 {
        return Ok(out);
    }
    let gap = Exp::new(p.lambda).map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
    let mut stations: Vec<Station> = (0..p.n)
        .map(|_| Station { queue: VecDeque::new(), next_arrival: gap.sample(&mut rng), stage: 0, counter: None })
        .collect();
    let cap = p.queue_len as usize;
    let mut delays = Vec::with_capacity(packets);
    let mut done = 0usize;
    let mut now = 0.0f64;
    let mut talkers = Vec::new();
    while delays.len() < packets {
        for s in stations.iter_mut() {
            while s.next_arrival <= now {
                if s.queue.len() < cap {
                    s.queue.push_back(s.next_arrival);
                } else {
                    out.overflow += 1;
                }
                s.next_arrival += gap.sample(&mut rng);
            }
            if s.counter.is_none() && !s.queue.is_empty() {
                s.stage = 0;
                s.counter = Some(rng.random_range(0..=cw[0]));
            }
        }
        if stations.iter().all(|s| s.queue.is_empty()) {
            let next = stations.iter().map(|s| s.next_arrival).fold(f64::INFINITY, f64::min);
            now = next.ceil().max(now + 1.0);
            continue;
        }
        talkers.clear();
        talkers.extend(stations.iter().enumerate().filter(|(_, s)| s.counter == Some(0)).map(|(i, _)| i));
        match talkers.len() {
            0 => {
                for s in stations.iter_mut() {
                    if let Some(c) = s.counter.as_mut() {
                        *c -= 1;
                    }
                }
                now += 1.0;
            }
            1 => {
                now += p.t_s;
                let s = &mut stations[talkers[0]];
                let arrived = s.queue.pop_front().expect("a talker has a packet");
                s.counter = None;
                out.successes += 1;
                out.delivered += 1;
                done += 1;
                if done > warmup {
                    delays.push(now - arrived);
                }
            }
            _ => {
                now += p.t_c;
                out.collisions += 1;
                for &i in &talkers {
                    let s = &mut stations[i];
                    if s.stage < cw.len() - 1 {
                        s.stage += 1;
                        s.counter = Some(rng.random_range(0..=cw[s.stage]));
                    } else {
                        let arrived = s.queue.pop_front().expect("a talker has a packet");
                        s.counter = None;
                        out.lost += 1;
                        done += 1;
                        if done > warmup && delays.len() < packets {
                            delays.push(now - arrived);
                        }
                    }
                }
            }
        }
    }
    out.slots = now;
    out.delays = EmpiricalCcdf::new(delays);
    Ok(out)
}
