//! The leader brakes hard; prints when each follower starts braking.
use hybrid_v2v::experiments::{default_surrogate, scenario_predictor, ExperimentOptions};
use hybrid_v2v::sim::{compute_metrics, urgent_brake_scenario, ScenarioConfig};

fn main() -> hybrid_v2v::Result<()> {
    let opts = ExperimentOptions::default();
    let surrogate = default_surrogate(opts.seed)?;
    let cfg = ScenarioConfig::degradation();
    let pred = scenario_predictor(&cfg, &opts)?;
    let trace = urgent_brake_scenario(&cfg, opts.brake_at, &surrogate, pred.as_ref())?;
    let m = compute_metrics(&trace, cfg.command_tolerance, 2.0, 20.0);
    for (v, onset) in m.brake_onset.iter().enumerate().skip(1) {
        println!("vehicle {v}: brakes after {onset:?} s");
    }
    println!("min gap {:.2} m, collision {}", m.min_gap, m.collision);
    Ok(())
}
