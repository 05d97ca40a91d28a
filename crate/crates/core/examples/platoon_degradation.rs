//! Platoon under a channel degradation, with and without prediction.
use hybrid_v2v::experiments::{default_surrogate, run_platoon, ExperimentOptions};
use hybrid_v2v::sim::ScenarioConfig;

fn main() -> hybrid_v2v::Result<()> {
    let opts = ExperimentOptions::default();
    let surrogate = default_surrogate(opts.seed)?;
    for prediction in [true, false] {
        let cfg = ScenarioConfig { prediction, ..ScenarioConfig::degradation() };
        let run = run_platoon(&cfg, &surrogate, &opts)?;
        let m = &run.metrics;
        println!(
            "prediction {prediction}: settles {:?} s, stable changes {}, gap {:.2} m (safe {:.2} m), min gap {:.2} m",
            m.convergence_time, m.stable_changes, m.stable_mean_gap, m.stable_mean_safe_distance, m.min_gap
        );
    }
    Ok(())
}
