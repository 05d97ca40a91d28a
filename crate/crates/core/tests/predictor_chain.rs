use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_v2v::predictor::{estimate_frequencies, worst_case_horizon, MarkovConfig, Pessimism, TransitionTable};

fn truth(a: usize, b: usize) -> [f64; 3] {
    let mut p = [0.1, 0.1, 0.1];
    p[(2 * a + b) % 3] += 0.5;
    p[a] += 0.2;
    p
}

fn sample(len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![2usize, 0];
    while s.len() < len {
        let p = truth(s[s.len() - 2], s[s.len() - 1]);
        let u: f64 = rng.random();
        s.push(if u < p[0] { 0 } else if u < p[0] + p[1] { 1 } else { 2 });
    }
    s
}

fn config() -> MarkovConfig {
    MarkovConfig { order: 2, bin_edges: vec![-0.5, 0.5, 1.5, 2.5], ..Default::default() }
}

#[test]
fn order_two_frequencies_recover_the_matrix() {
    let table = estimate_frequencies(&[sample(100_000, 1)], &config()).unwrap();
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let est = &table.frequencies[&vec![a, b]];
            for (e, t) in est.iter().zip(truth(a, b)) {
                worst = worst.max((e - t).abs());
            }
        }
    }
    assert!(worst < 0.02, "max |P^ - P| = {worst}");
}

#[test]
fn counts_add_up_to_transitions() {
    let seqs = [sample(500, 2), sample(300, 3)];
    let table: TransitionTable = estimate_frequencies(&seqs, &config()).unwrap();
    let total: u64 = table.counts.values().flat_map(|c| c.iter()).sum();
    assert_eq!(total, (500 - 2) + (300 - 2));
}

#[test]
fn any_nonzero_rule_reaches_at_least_the_threshold_rule() {
    let table = estimate_frequencies(&[sample(20_000, 4)], &config()).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            for h in 1..4 {
                let strict = worst_case_horizon(&table, &[a, b], h, Pessimism::Threshold(0.3));
                let loose = worst_case_horizon(&table, &[a, b], h, Pessimism::AnyNonzero);
                assert!(loose >= strict);
                assert_eq!(loose, 2, "every level has support");
            }
        }
    }
}
