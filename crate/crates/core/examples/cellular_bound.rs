//! Contention channel: fixed point, service moments, and the delay bound
//! against a packet-level simulation.
use hybrid_v2v::cellular::{cellular_delay_ccdf_with, cellular_metrics, BackoffParams};
use hybrid_v2v::presets::per_slot;
use hybrid_v2v::sim::simulate_cellular_mc;

fn main() -> hybrid_v2v::Result<()> {
    for lambda in [0.1, 0.2] {
        let p = BackoffParams::default().with_lambda(per_slot(lambda));
        let m = cellular_metrics(&p)?;
        println!(
            "lambda {lambda}/100 slots: p_c {:.4} p_a {:.4} mean service {:.1} slots, queue {:.4}",
            m.p_c, m.p_a, m.t_bar_serv, m.t_q
        );
        let mc = simulate_cellular_mc(&p, 10_000, 200, 7)?;
        println!("simulated mean delay {:.1} slots", mc.delays.mean().unwrap_or(f64::NAN));
        println!("{:>10} {:>12} {:>12}", "x", "bound", "simulated");
        for x in [50.0, 200.0, 500.0, 1e4, 5e4, 1e5] {
            let b = cellular_delay_ccdf_with(&p, &m, x)?;
            println!("{x:>10} {b:>12.3e} {:>12.3e}", mc.delays.point(x).ccdf);
        }
    }
    Ok(())
}
