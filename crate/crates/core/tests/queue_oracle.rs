use hybrid_v2v::cellular::{cellular_delay_ccdf_with, cellular_metrics, service_time_distribution, BackoffParams};
use hybrid_v2v::presets::per_slot;
use hybrid_v2v::sim::{simulate_cellular_mc, simulate_mg1};

#[test]
fn waiting_term_matches_queue_simulation() {
    let p = BackoffParams::default().with_lambda(per_slot(0.1));
    let m = cellular_metrics(&p).unwrap();
    let q = simulate_mg1(p.lambda, &service_time_distribution(&p, &m), 1_000_000, 17).unwrap();
    let rel = (q.mean_in_system - m.t_q).abs() / m.t_q;
    assert!(rel < 0.05, "t_q {} vs simulated {} ({rel})", m.t_q, q.mean_in_system);
    // Utilization agrees with λ times the mean service time.
    assert!((q.utilization - p.lambda * m.t_bar_serv).abs() < 0.01);
}

#[test]
fn bound_is_non_increasing_and_dominates_simulation() {
    let p = BackoffParams::default().with_lambda(per_slot(0.1));
    let m = cellular_metrics(&p).unwrap();
    let mc = simulate_cellular_mc(&p, 5_000, 100, 23).unwrap();
    let mut prev = 1.0;
    for k in 0..60 {
        let x = 10f64.powf(k as f64 / 10.0);
        let b = cellular_delay_ccdf_with(&p, &m, x).unwrap();
        assert!(b <= prev + 1e-12, "bound rises at {x}");
        prev = b;
        if b < 1.0 && b > 1e-3 {
            assert!(b >= mc.delays.point(x).upper, "bound {b} below the envelope at {x}");
        }
    }
}
