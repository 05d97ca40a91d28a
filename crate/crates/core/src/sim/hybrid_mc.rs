//! Split traffic over both simulated channels.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hybrid::HybridConfig;

use super::cellular_mc::simulate_cellular_mc;
use super::empirical::EmpiricalCcdf;
use super::mmwave_mc::{simulate_mmwave_mc, MmWaveMcConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMcResult {
    pub cellular: EmpiricalCcdf,
    pub mmwave: EmpiricalCcdf,
    /// Per-packet delays of the mixed stream.
    pub combined: EmpiricalCcdf,
}

/// Each branch is simulated at its share of the load; the combined sample
/// draws packets from the branches in proportion to the split.
pub fn simulate_hybrid_mc(cfg: &HybridConfig, packets: usize, seed: u64) -> Result<HybridMcResult> {
    cfg.validate()?;
    let n_mm = (cfg.split * packets as f64).round() as usize;
    let n_cell = packets - n_mm;
    let cell_p = cfg.cellular.clone().with_lambda((1.0 - cfg.split) * cfg.lambda_total);
    let cell = simulate_cellular_mc(&cell_p, n_cell, n_cell / 50, seed)?.delays;
    let mm_cfg = MmWaveMcConfig { lambda: cfg.split * cfg.lambda_total, packets: n_mm, warmup: n_mm / 50, seed: seed ^ 0x9e37_79b9, ..Default::default() };
    let mm = simulate_mmwave_mc(&cfg.mmwave, &mm_cfg)?.delays;
    let mut all = cell.samples().to_vec();
    all.extend_from_slice(mm.samples());
    Ok(HybridMcResult { cellular: cell, mmwave: mm, combined: EmpiricalCcdf::new(all) })
}
