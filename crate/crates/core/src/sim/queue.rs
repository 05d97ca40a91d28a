//! Event-driven single-server FIFO queue with Poisson arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub mean_wait: f64,
    pub mean_sojourn: f64,
    /// Time-averaged number in system, `λ · mean sojourn`.
    pub mean_in_system: f64,
    pub utilization: f64,
}

/// Runs `packets` customers through the queue. `service` is a discrete law
/// of `(duration, probability)` pairs.
pub fn simulate_mg1(lambda: f64, service: &[(f64, f64)], packets: usize, seed: u64) -> Result<QueueStats> {
    if !(lambda > 0.0) || service.is_empty() || packets == 0 {
        return Err(Error::InvalidParameter("queue simulation needs lambda > 0, a service law and packets".into()));
    }
    let total: f64 = service.iter().map(|s| s.1).sum();
    let mut cum = Vec::with_capacity(service.len());
    let mut acc = 0.0;
    for &(_, w) in service {
        acc += w / total;
        cum.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (mut t, mut free_at) = (0.0f64, 0.0f64);
    let (mut wait, mut sojourn, mut busy) = (0.0, 0.0, 0.0);
    for _ in 0..packets {
        t += gap.sample(&mut rng);
        let u: f64 = rng.random();
        let i = cum.partition_point(|&c| c < u).min(service.len() - 1);
        let s = service[i].0;
        let start = t.max(free_at);
        free_at = start + s;
        wait += start - t;
        sojourn += free_at - t;
        busy += s;
    }
    let n = packets as f64;
    Ok(QueueStats {
        mean_wait: wait / n,
        mean_sojourn: sojourn / n,
        mean_in_system: lambda * sojourn / n,
        utilization: busy / free_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_service_matches_pollaczek_khinchin() {
        // M/D/1: mean wait ρ s / (2 (1 - ρ)).
        let (lambda, s) = (0.5, 1.0);
        let q = simulate_mg1(lambda, &[(s, 1.0)], 400_000, 5).unwrap();
        let expect = 0.5 * s / (2.0 * 0.5);
        assert!((q.mean_wait - expect).abs() < 0.03 * expect, "{} vs {expect}", q.mean_wait);
    }
}
