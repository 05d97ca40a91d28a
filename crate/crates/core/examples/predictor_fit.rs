//! Fits the channel-parameter chains on a degraded regime and asks for the
//! pessimistic next value.
use hybrid_v2v::sim::{train_scenario_predictor, Regime, ScenarioConfig};
use hybrid_v2v::predictor::ChannelEstimate;

fn main() -> hybrid_v2v::Result<()> {
    let cfg = ScenarioConfig::degradation();
    let pred = train_scenario_predictor(&cfg, &Regime::degraded(), 5000, 11)?;
    for chain in [&pred.noise_level, &pred.n, &pred.lambda] {
        println!("{}: bins {:?}, max TV after smoothing {:.4}", chain.name, chain.config.bin_edges, chain.model.max_tv);
    }
    let history = vec![ChannelEstimate { noise_level: 2.0, n: 6.0, lambda: 0.002 }; 3];
    println!("worst case after {history:?}:\n  {:?}", pred.worst_case(&history));
    Ok(())
}
