use hybrid_v2v::hybrid::{mean_from_ccdf, Channel, ChannelBound, HybridConfig};
use hybrid_v2v::mmwave::log_grid;
use hybrid_v2v::presets::per_slot;

#[test]
fn hybrid_never_exceeds_cellular_at_full_load() {
    for (lambda, n) in [(0.1, 6), (0.2, 10), (0.3, 4)] {
        let cfg = HybridConfig::default().with_lambda(per_slot(lambda)).with_n(n);
        let cell = ChannelBound::new(&cfg, Channel::Cellular).unwrap();
        let hyb = ChannelBound::new(&cfg, Channel::Hybrid).unwrap();
        for x in log_grid(1.0, 3e5, 25) {
            let (c, h) = (cell.ccdf(x).unwrap().probability, hyb.ccdf(x).unwrap().probability);
            assert!(h <= c.min(1.0) + 1e-12, "λ={lambda} n={n} x={x}: hybrid {h} > cellular {c}");
        }
    }
}

#[test]
fn mean_of_exponential_tail() {
    let xs = log_grid(1e-4, 40.0, 4000);
    let ps: Vec<f64> = xs.iter().map(|x| (-x).exp()).collect();
    let m = mean_from_ccdf(&xs, &ps);
    assert!((m.mean - 1.0).abs() < 1e-3, "{}", m.mean);
    assert!(!m.truncated);
}
