use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn brute_minplus(a: &Curve, b: &Curve, t: f64, step: f64) -> f64 {
    let n = (t / step).round() as usize;
    (0..=n)
        .map(|k| {
            let tau = (k as f64 * step).min(t);
            a.eval(tau) + b.eval(t - tau)
        })
        .fold(f64::INFINITY, f64::min)
}

fn three_segment(r: &mut ChaCha8Rng) -> Curve {
    let mut t = 0.0;
    let mut v = r.random_range(0.0..2.0);
    let mut pts = vec![(0.0, v)];
    for _ in 0..3 {
        t += r.random_range(1.0..6.0f64).round();
        v += r.random_range(0.0..10.0);
        pts.push((t, v));
    }
    Curve::with_tail(pts, r.random_range(0.0..3.0)).unwrap()
}

#[test]
fn minplus_of_two_rates_is_the_smaller_rate() {
    let c = minplus_convolve(&Curve::linear(3.0), &Curve::linear(5.0));
    for t in [0.0, 0.5, 1.0, 7.0, 100.0] {
        assert_abs_diff_eq!(c.eval(t), 3.0 * t, epsilon = 1e-9);
    }
}

#[test]
fn minplus_with_zero_curve_is_initial_value() {
    let a = Curve::from_points(vec![(0.0, 1.5), (2.0, 4.0), (5.0, 9.0)]).unwrap();
    let zero = Curve::linear(0.0);
    let c = minplus_convolve(&a, &zero);
    for t in [0.0, 1.0, 3.0, 10.0] {
        assert_abs_diff_eq!(c.eval(t), 1.5, epsilon = 1e-12);
    }
}

#[test]
fn minplus_matches_dense_grid_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let a = three_segment(&mut r);
        let b = three_segment(&mut r);
        let c = minplus_convolve(&a, &b);
        for t in 0..=20 {
            let t = t as f64;
            let oracle = brute_minplus(&a, &b, t, 0.01);
            assert!((c.eval(t) - oracle).abs() < 1e-9, "t={t}: {} vs {oracle}", c.eval(t));
        }
    }
}

proptest! {
    #[test]
    fn minplus_commutes_and_associates(seed in 0u64..10_000) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (three_segment(&mut r), three_segment(&mut r), three_segment(&mut r));
        let ab = minplus_convolve(&a, &b);
        let ba = minplus_convolve(&b, &a);
        let ab_c = minplus_convolve(&ab, &c);
        let a_bc = minplus_convolve(&a, &minplus_convolve(&b, &c));
        for k in 0..=60 {
            let t = k as f64 * 0.5;
            prop_assert!((ab.eval(t) - ba.eval(t)).abs() < 1e-9);
            prop_assert!((ab_c.eval(t) - a_bc.eval(t)).abs() < 1e-9);
            prop_assert!(ab.eval(t) <= (a.eval(t) + b.eval(0.0)).min(a.eval(0.0) + b.eval(t)) + 1e-9);
        }
    }
}

#[test]
fn tail_convolution_with_zero_bounds() {
    let z = TailBound::zero();
    assert_eq!(convolve_tailbounds(&z, &z, 3.0), 0.0);
    // With f ≡ 0 the infimum is reached at u = 0 and leaves g(x).
    let g = TailBound::exponential(1.0);
    assert_abs_diff_eq!(convolve_tailbounds(&z, &g, 2.0), (-2.0f64).exp(), epsilon = 1e-12);
}

#[test]
fn symmetric_exponentials_meet_in_the_middle() {
    let f = TailBound::exponential(1.0);
    let v = convolve_tailbounds(&f, &f, 2.0);
    assert_abs_diff_eq!(v, 2.0 * (-1.0f64).exp(), epsilon = 1e-9);
    assert_abs_diff_eq!(v, 0.7358, epsilon = 1e-4);
}

#[test]
fn exponential_and_step_match_dense_oracle() {
    let f = TailBound::exponential(0.7);
    for s0 in [0.5, 1.0, 3.0] {
        let g = TailBound::step(s0);
        for x in 0..=10 {
            let x = x as f64;
            let n = (x / 1e-4).round() as usize;
            let oracle = (0..=n)
                .map(|k| {
                    let u = k as f64 * 1e-4;
                    f.eval(u) + g.eval(x - u)
                })
                .fold(f64::INFINITY, f64::min)
                .min(1.0);
            let v = convolve_tailbounds(&f, &g, x);
            assert!((v - oracle).abs() < 1e-6, "x={x} s0={s0}: {v} vs {oracle}");
        }
    }
}

proptest! {
    #[test]
    fn tail_convolution_is_non_increasing_and_capped(r1 in 0.1f64..3.0, r2 in 0.1f64..3.0, x in 0.0f64..8.0) {
        let f = TailBound::exponential(r1);
        let g = TailBound::exponential(r2);
        let a = convolve_tailbounds_with(&f, &g, x, 2000);
        let b = convolve_tailbounds_with(&f, &g, x + 0.5, 2000);
        prop_assert!(b <= a + 1e-9);
        prop_assert!(a <= (f.eval(0.0) + g.eval(x)).min(1.0) + 1e-12);
    }
}

#[test]
fn stieltjes_with_unit_step_is_identity() {
    let a = |z: f64| if z < 0.0 { 1.0 } else { (-0.3 * z).exp() };
    let step = |y: f64| if y >= 0.0 { 1.0 } else { 0.0 };
    let opts = StieltjesOptions::default();
    for x in [0.0, 0.5, 2.0, 7.0] {
        let v = stieltjes_convolve(a, step, x, &opts).unwrap();
        assert_abs_diff_eq!(v, a(x), epsilon = 1e-12);
    }
}

#[test]
fn stieltjes_with_constant_integrand_is_total_variation() {
    let b = |y: f64| if y < 0.0 { 0.0 } else { 3.0 * (1.0 - (-y).exp()) };
    let opts = StieltjesOptions { upper: 60.0, ..Default::default() };
    let v = stieltjes_convolve(|_| 1.0, b, 4.0, &opts).unwrap();
    assert_abs_diff_eq!(v, b(60.5) - b(-1.0), epsilon = 1e-9);
}

/// Midpoint quadrature of `∫ a(x - y) b'(y) dy` with a fine fixed step.
fn density_quadrature(a: impl Fn(f64) -> f64, density: impl Fn(f64) -> f64, x: f64, upper: f64, step: f64) -> f64 {
    let n = (upper / step) as usize;
    (0..n).map(|k| {
        let y = (k as f64 + 0.5) * step;
        a(x - y) * density(y) * step
    }).sum()
}

#[test]
fn stieltjes_matches_quadrature_on_exponential_tails() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let ra: f64 = r.random_range(0.2..2.0);
        let rb: f64 = r.random_range(0.2..2.0);
        let x: f64 = r.random_range(0.0..6.0);
        let a = move |z: f64| if z < 0.0 { 1.0 } else { (-ra * z).exp() };
        let b = move |y: f64| if y < 0.0 { 0.0 } else { 1.0 - (-rb * y).exp() };
        let opts = StieltjesOptions { upper: 40.0, tolerance: 1e-6, ..Default::default() };
        let v = stieltjes_convolve(a, b, x, &opts).unwrap();
        let oracle = density_quadrature(a, |y| rb * (-rb * y).exp(), x, 40.0, 1e-5);
        assert!((v - oracle).abs() < 1e-4, "{v} vs {oracle}");
    }
}

#[test]
fn stieltjes_reports_non_convergence() {
    let opts = StieltjesOptions { max_halvings: 1, tolerance: 1e-15, ..Default::default() };
    let b = |y: f64| if y < 0.0 { 0.0 } else { 1.0 - (-y).exp() };
    let err = stieltjes_convolve(|z: f64| (z * 13.0).sin(), b, 1.0, &opts).unwrap_err();
    assert!(matches!(err, crate::Error::NonConvergent(_)));
}

#[test]
fn deviation_of_linear_curves() {
    let (r, big_r) = (2.0, 5.0);
    for x in [0.0, 1.0, 3.5, 10.0] {
        let h = horizontal_deviation(&Curve::linear(r), &Curve::linear(big_r), x).unwrap();
        assert_abs_diff_eq!(h, x / big_r, epsilon = 1e-12);
    }
    let same = Curve::from_points(vec![(0.0, 0.0), (1.0, 2.0), (4.0, 3.0)]).unwrap();
    assert_abs_diff_eq!(horizontal_deviation(&same, &same, 0.0).unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn deviation_rejects_unstable_pairs() {
    let err = horizontal_deviation(&Curve::linear(3.0), &Curve::linear(1.0), 0.0).unwrap_err();
    assert!(matches!(err, crate::Error::UnstableSystem { .. }));
}

fn brute_deviation(alpha: &Curve, beta: &Curve, x: f64, step: f64, horizon: f64) -> f64 {
    let mut sup = 0.0f64;
    let n = (horizon / step) as usize;
    for i in 0..=n {
        let t = i as f64 * step;
        let target = alpha.eval(t) + x;
        let mut k = 0usize;
        while beta.eval(t + k as f64 * step) < target - 1e-12 {
            k += 1;
        }
        sup = sup.max(k as f64 * step);
    }
    sup
}

#[test]
fn deviation_with_backlog_bump_matches_dense_grid() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        // Arrivals burst early then settle to a slow rate; service has a latency.
        let burst_end = r.random_range(1.0..4.0f64).round();
        let alpha = Curve::with_tail(
            vec![(0.0, r.random_range(0.0..2.0)), (burst_end, 6.0 + r.random_range(0.0..4.0))],
            r.random_range(0.2..1.0),
        )
        .unwrap();
        let beta = Curve::rate_latency(r.random_range(1.5..3.0), r.random_range(0.0..3.0f64).round());
        let x = r.random_range(0.0..3.0f64);
        let h = horizontal_deviation(&alpha, &beta, x).unwrap();
        let step = 0.01;
        let oracle = brute_deviation(&alpha, &beta, x, step, 40.0);
        assert!((h - oracle).abs() <= step + 1e-9, "{h} vs {oracle}");
    }
}

proptest! {
    #[test]
    fn deviation_monotone_in_offset_and_arrivals(x in 0.0f64..5.0, dx in 0.0f64..2.0, bump in 0.0f64..2.0) {
        let alpha = Curve::from_points(vec![(0.0, 1.0), (2.0, 5.0), (6.0, 6.0)]).unwrap();
        let alpha_up = Curve::from_points(vec![(0.0, 1.0 + bump), (2.0, 5.0 + bump), (6.0, 6.0 + bump)]).unwrap();
        let beta = Curve::rate_latency(2.0, 1.0);
        let base = horizontal_deviation(&alpha, &beta, x).unwrap();
        prop_assert!(horizontal_deviation(&alpha, &beta, x + dx).unwrap() >= base - 1e-12);
        prop_assert!(horizontal_deviation(&alpha_up, &beta, x).unwrap() >= base - 1e-12);
    }
}

#[test]
fn delay_bound_converts_offsets_through_the_service_rate() {
    let rate = 4.0;
    let g = TailBound::exponential(0.5);
    let p = delay_bound(&Curve::linear(rate), &Curve::linear(rate), &TailBound::zero(), &g, 2.0).unwrap();
    assert_abs_diff_eq!(p, (-0.5f64 * 8.0).exp(), epsilon = 1e-9);
}

#[test]
fn aggregation_adds_rates_and_bursts() {
    let a = StochasticArrival::new(0.5, |_| 1.5, |_| 0.25).unwrap();
    let one = aggregate_arrivals(std::slice::from_ref(&a)).unwrap();
    assert_eq!((one.rho(), one.sigma()), (1.5, 0.25));
    let two = aggregate_arrivals(&[a.clone(), a.clone()]).unwrap();
    assert_eq!((two.rho(), two.sigma()), (3.0, 0.5));
    let other = StochasticArrival::new(0.7, |_| 1.0, |_| 0.0).unwrap();
    assert!(matches!(aggregate_arrivals(&[a, other]), Err(crate::Error::MismatchedTheta(..))));
}

#[test]
fn aggregated_poisson_mgf_bound_holds_under_monte_carlo() {
    use rand_distr::{Distribution, Poisson};
    let theta = 0.3;
    let rates = [0.4, 1.1, 2.5];
    let flows: Vec<_> = rates.iter().map(|&r| StochasticArrival::poisson(r, 1.0, theta).unwrap()).collect();
    let agg = aggregate_arrivals(&flows).unwrap();
    let span = 5.0;
    let product: f64 = flows.iter().map(|f| f.mgf_bound(span)).product();
    assert!((agg.mgf_bound(span) - product).abs() < 1e-9 * product);

    let mut r = ChaCha8Rng::seed_from_u64(42);
    let dists: Vec<Poisson<f64>> = rates.iter().map(|&l| Poisson::new(l * span).unwrap()).collect();
    let n = 200_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let total: f64 = dists.iter().map(|d| d.sample(&mut r)).sum();
        acc += (theta * total).exp();
    }
    let empirical = acc / n as f64;
    // Poisson increments meet the bound with equality, so allow sampling noise.
    assert!(empirical <= agg.mgf_bound(span) * 1.01, "{empirical} > {}", agg.mgf_bound(span));
    assert!(empirical >= agg.mgf_bound(span) * 0.97);
}
