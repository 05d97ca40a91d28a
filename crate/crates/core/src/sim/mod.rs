//! Monte Carlo channel oracles and the platoon simulator.

pub mod cellular_mc;
pub mod empirical;
pub mod hybrid_mc;
pub mod mmwave_mc;
mod platoon;
pub mod queue;

pub use cellular_mc::{simulate_cellular_mc, CellularMcResult};
pub use empirical::{clopper_pearson, CcdfPoint, EmpiricalCcdf};
pub use hybrid_mc::{simulate_hybrid_mc, HybridMcResult};
pub use mmwave_mc::{simulate_mmwave_mc, Forwarding, MmWaveMcConfig, MmWaveMcResult};
pub use queue::{simulate_mg1, QueueStats};
pub use platoon::{
    baseline_follower, compute_metrics, run_platoon_scenario, train_scenario_predictor, urgent_brake_scenario, write_trace_csv, BaselineConfig,
    ControllerKind, EventKind, Metrics, Regime, ScenarioConfig, ScenarioEvent, SimTrace, TraceRow, CALIBRATED_SLOT_DURATION, TRACE_HEADER,
};
