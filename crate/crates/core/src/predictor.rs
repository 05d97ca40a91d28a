//! Order-n Markov prediction of discretised channel parameters.
//!
//! Sequences of levels are counted per context, the frequencies are smoothed
//! toward unseen successors with a count-dependent confidence factor, and a
//! small ramp network learns the context → distribution map. The controller
//! then asks for the worst level reachable within a horizon.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mlp, TrainOptions};

pub const MODEL_SCHEMA: &str = "hybrid-v2v/predictor/v1";
pub const SAMPLES_HEADER: &str = "t,noise_level,n,lambda";

/// How the smoothed vector is completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMode {
    /// Clamp at `ε` and rescale to sum 1.
    #[default]
    Renormalized,
    /// The update as written: no clamp, no rescaling.
    Verbatim,
}

/// Which successors count as possible in the horizon search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pessimism {
    /// Probability above the threshold.
    Threshold(f64),
    /// Any positive probability.
    AnyNonzero,
}

impl Default for Pessimism {
    fn default() -> Self {
        Pessimism::Threshold(0.05)
    }
}

impl Pessimism {
    fn admits(self, prob: f64) -> bool {
        match self {
            Pessimism::Threshold(t) => prob > t,
            Pessimism::AnyNonzero => prob > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkovConfig {
    pub order: usize,
    /// Bin boundaries; `levels = bin_edges.len() - 1`.
    pub bin_edges: Vec<f64>,
    pub zeta: f64,
    pub horizon: usize,
    pub pessimism: Pessimism,
    pub smoothing: SmoothingMode,
    pub epsilon: f64,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        Self {
            order: 2,
            bin_edges: vec![0.0, 1.0, 2.0, 3.0],
            zeta: -0.1,
            horizon: 5,
            pessimism: Pessimism::default(),
            smoothing: SmoothingMode::Renormalized,
            epsilon: 1e-9,
        }
    }
}

impl MarkovConfig {
    pub fn levels(&self) -> usize {
        self.bin_edges.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidParameter("order must be at least 1".into()));
        }
        if self.levels() < 2 {
            return Err(Error::InvalidParameter("need at least two levels".into()));
        }
        if !self.bin_edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("bin edges must increase strictly".into()));
        }
        if !(self.zeta < 0.0) {
            return Err(Error::InvalidParameter(format!("zeta must be negative, got {}", self.zeta)));
        }
        Ok(())
    }

    /// Midpoint of the bin for `level`.
    pub fn level_value(&self, level: usize) -> f64 {
        let l = level.min(self.levels() - 1);
        0.5 * (self.bin_edges[l] + self.bin_edges[l + 1])
    }
}

/// Index of the half-open bin `[e_i, e_{i+1})` holding `value`; values past
/// either end fall in the end bins.
pub fn discretize(value: f64, bin_edges: &[f64]) -> usize {
    let levels = bin_edges.len().saturating_sub(1).max(1);
    bin_edges.partition_point(|&e| e <= value).saturating_sub(1).min(levels - 1)
}

pub type Context = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionTable {
    pub levels: usize,
    pub counts: BTreeMap<Context, Vec<u64>>,
    pub frequencies: BTreeMap<Context, Vec<f64>>,
}

impl TransitionTable {
    pub fn context_count(&self, ctx: &[usize]) -> u64 {
        self.counts.get(ctx).map_or(0, |c| c.iter().sum())
    }
}

/// Raw frequencies `C(context, x) / C(context)`.
pub fn estimate_frequencies(sequences: &[Vec<usize>], cfg: &MarkovConfig) -> Result<TransitionTable> {
    cfg.validate()?;
    let levels = cfg.levels();
    let mut counts: BTreeMap<Context, Vec<u64>> = BTreeMap::new();
    for s in sequences {
        if s.len() < cfg.order + 1 {
            return Err(Error::InvalidParameter(format!("sequence of length {} is shorter than order + 1", s.len())));
        }
        if let Some(&bad) = s.iter().find(|&&v| v >= levels) {
            return Err(Error::InvalidParameter(format!("level {bad} out of range")));
        }
        for w in s.windows(cfg.order + 1) {
            counts.entry(w[..cfg.order].to_vec()).or_insert_with(|| vec![0; levels])[w[cfg.order]] += 1;
        }
    }
    let frequencies = counts
        .iter()
        .map(|(k, c)| {
            let total: u64 = c.iter().sum();
            (k.clone(), c.iter().map(|&v| v as f64 / total as f64).collect())
        })
        .collect();
    Ok(TransitionTable { levels, counts, frequencies })
}

/// `F = 1 - e^{ζ C}`.
pub fn confidence_factor(count: f64, zeta: f64) -> f64 {
    -(zeta * count).exp_m1()
}

/// Moves `F / Z` to each of the `Z` unseen states and takes it from each
/// seen one.
pub fn smooth_vector(p: &[f64], f: f64, mode: SmoothingMode, epsilon: f64) -> Vec<f64> {
    let z = p.iter().filter(|&&v| v == 0.0).count();
    if z == 0 {
        return p.to_vec();
    }
    let share = f / z as f64;
    let out: Vec<f64> = p
        .iter()
        .map(|&v| {
            if v == 0.0 {
                share
            } else {
                match mode {
                    SmoothingMode::Renormalized => (v - share).max(epsilon),
                    SmoothingMode::Verbatim => v - share,
                }
            }
        })
        .collect();
    match mode {
        SmoothingMode::Verbatim => out,
        SmoothingMode::Renormalized => {
            let s: f64 = out.iter().sum();
            out.iter().map(|v| v / s).collect()
        }
    }
}

pub fn smooth_frequencies(table: &TransitionTable, cfg: &MarkovConfig) -> TransitionTable {
    let frequencies = table
        .frequencies
        .iter()
        .map(|(k, p)| {
            let f = confidence_factor(table.context_count(k) as f64, cfg.zeta);
            (k.clone(), smooth_vector(p, f, cfg.smoothing, cfg.epsilon))
        })
        .collect();
    TransitionTable { levels: table.levels, counts: table.counts.clone(), frequencies }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub schema: String,
    pub order: usize,
    pub levels: usize,
    pub net: Mlp,
    /// Largest total-variation distance to the table over its contexts.
    pub max_tv: f64,
}

fn one_hot(ctx: &[usize], levels: usize) -> Vec<f64> {
    let mut x = vec![0.0; ctx.len() * levels];
    for (i, &l) in ctx.iter().enumerate() {
        x[i * levels + l.min(levels - 1)] = 1.0;
    }
    x
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorHyper {
    pub hidden: Vec<usize>,
    pub train: TrainOptions,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        Self { hidden: vec![32, 32], train: TrainOptions { epochs: 1500, batch_size: 16, learning_rate: 1e-2, patience: 25, min_learning_rate: 1e-6, seed: 3 } }
    }
}

/// Fits the network to the (smoothed) table on one-hot coded contexts.
pub fn train_predictor(table: &TransitionTable, hyper: &PredictorHyper) -> Result<PredictorModel> {
    let order = table.frequencies.keys().next().map(|k| k.len()).ok_or_else(|| Error::InvalidParameter("empty transition table".into()))?;
    let levels = table.levels;
    let xs: Vec<Vec<f64>> = table.frequencies.keys().map(|k| one_hot(k, levels)).collect();
    let ys: Vec<Vec<f64>> = table.frequencies.values().cloned().collect();
    let mut dims = vec![order * levels];
    dims.extend(&hyper.hidden);
    dims.push(levels);
    let mut net = Mlp::new(&dims, hyper.train.seed)?;
    net.train(&xs, &ys, &hyper.train)?;
    let mut model = PredictorModel { schema: MODEL_SCHEMA.into(), order, levels, net, max_tv: 0.0 };
    model.max_tv = table
        .frequencies
        .iter()
        .map(|(k, p)| total_variation(&model.distribution(k), p))
        .fold(0.0, f64::max);
    Ok(model)
}

impl PredictorModel {
    /// Next-level distribution: network outputs clamped at zero and rescaled;
    /// uniform if nothing is left.
    pub fn distribution(&self, ctx: &[usize]) -> Vec<f64> {
        let raw = self.net.forward(&one_hot(ctx, self.levels));
        let clamped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = clamped.iter().sum();
        if s > 0.0 && s.is_finite() {
            clamped.iter().map(|v| v / s).collect()
        } else {
            vec![1.0 / self.levels as f64; self.levels]
        }
    }
}

/// Anything that maps a context to a next-level distribution.
pub trait Transition {
    fn next(&self, ctx: &[usize]) -> Vec<f64>;
}

impl Transition for PredictorModel {
    fn next(&self, ctx: &[usize]) -> Vec<f64> {
        self.distribution(ctx)
    }
}

impl Transition for TransitionTable {
    fn next(&self, ctx: &[usize]) -> Vec<f64> {
        self.frequencies.get(ctx).cloned().unwrap_or_else(|| vec![1.0 / self.levels as f64; self.levels])
    }
}

/// Highest level reachable within `horizon` steps along transitions the
/// pessimism rule admits. Higher levels are worse.
pub fn worst_case_horizon(model: &impl Transition, context: &[usize], horizon: usize, rule: Pessimism) -> usize {
    fn go(m: &impl Transition, ctx: &[usize], left: usize, rule: Pessimism, memo: &mut HashMap<(Context, usize), usize>) -> usize {
        if left == 0 {
            return 0;
        }
        if let Some(&v) = memo.get(&(ctx.to_vec(), left)) {
            return v;
        }
        let mut worst = 0;
        for (s, &prob) in m.next(ctx).iter().enumerate() {
            if !rule.admits(prob) {
                continue;
            }
            let mut next = ctx[1..].to_vec();
            next.push(s);
            worst = worst.max(s).max(go(m, &next, left - 1, rule, memo));
        }
        memo.insert((ctx.to_vec(), left), worst);
        worst
    }
    go(model, context, horizon.max(1), rule, &mut HashMap::new())
}

/// One predictor per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterChain {
    pub name: String,
    pub config: MarkovConfig,
    pub model: PredictorModel,
}

impl ParameterChain {
    pub fn fit(name: &str, values: &[f64], config: MarkovConfig, hyper: &PredictorHyper) -> Result<Self> {
        let seq: Vec<usize> = values.iter().map(|&v| discretize(v, &config.bin_edges)).collect();
        let table = smooth_frequencies(&estimate_frequencies(&[seq], &config)?, &config);
        let model = train_predictor(&table, hyper)?;
        Ok(Self { name: name.into(), config, model })
    }

    /// Worst level reachable from the latest `order` samples in `history`.
    pub fn worst_level(&self, history: &[f64]) -> Option<usize> {
        let k = self.config.order;
        if history.len() < k {
            return None;
        }
        let ctx: Vec<usize> = history[history.len() - k..].iter().map(|&v| discretize(v, &self.config.bin_edges)).collect();
        Some(worst_case_horizon(&self.model, &ctx, self.config.horizon, self.config.pessimism))
    }

    pub fn worst_value(&self, history: &[f64]) -> Option<f64> {
        self.worst_level(history).map(|l| self.config.level_value(l))
    }
}

/// Channel inputs of the delay bound at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    /// Extra noise in dB.
    pub noise_level: f64,
    /// Vehicles sharing the channel.
    pub n: f64,
    /// Packets per slot per vehicle.
    pub lambda: f64,
}

/// Independent chains for noise, vehicle count and arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPredictor {
    pub noise_level: ParameterChain,
    pub n: ParameterChain,
    pub lambda: ParameterChain,
}

impl ParameterPredictor {
    /// Fits one chain per parameter on the same sample sequence.
    pub fn fit(samples: &[ChannelEstimate], configs: [MarkovConfig; 3], hyper: &PredictorHyper) -> Result<Self> {
        let [c_noise, c_n, c_lambda] = configs;
        let col = |f: fn(&ChannelEstimate) -> f64| samples.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            noise_level: ParameterChain::fit("noise_level", &col(|s| s.noise_level), c_noise, hyper)?,
            n: ParameterChain::fit("n", &col(|s| s.n), c_n, hyper)?,
            lambda: ParameterChain::fit("lambda", &col(|s| s.lambda), c_lambda, hyper)?,
        })
    }

    /// Element-wise worst case over each chain's horizon; `None` until the
    /// history is as long as every chain's order.
    pub fn worst_case(&self, history: &[ChannelEstimate]) -> Option<ChannelEstimate> {
        let col = |f: fn(&ChannelEstimate) -> f64| history.iter().map(f).collect::<Vec<_>>();
        Some(ChannelEstimate {
            noise_level: self.noise_level.worst_value(&col(|s| s.noise_level))?,
            n: self.n.worst_value(&col(|s| s.n))?,
            lambda: self.lambda.worst_value(&col(|s| s.lambda))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample {
    pub t: f64,
    pub noise_level: f64,
    pub n: f64,
    pub lambda: f64,
}

pub fn read_samples_csv(input: impl BufRead) -> Result<Vec<ParameterSample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != SAMPLES_HEADER {
                return Err(Error::Config(format!("samples header must be `{SAMPLES_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("samples line {}: `{line}`", i + 1)))?;
        if f.len() != 4 {
            return Err(Error::Config(format!("samples line {} needs 4 fields", i + 1)));
        }
        out.push(ParameterSample { t: f[0], noise_level: f[1], n: f[2], lambda: f[3] });
    }
    Ok(out)
}

pub fn write_samples_csv(samples: &[ParameterSample], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SAMPLES_HEADER}")?;
    for s in samples {
        writeln!(out, "{},{},{},{}", s.t, s.noise_level, s.n, s.lambda)?;
    }
    Ok(())
}

pub fn save_model(model: &PredictorModel, out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, model)?;
    Ok(())
}

pub fn load_model(input: impl std::io::Read) -> Result<PredictorModel> {
    let m: PredictorModel = serde_json::from_reader(input)?;
    if m.schema != MODEL_SCHEMA {
        return Err(Error::Config(format!("model schema `{}` is not `{MODEL_SCHEMA}`", m.schema)));
    }
    if !m.net.is_consistent() || m.net.inputs() != m.order * m.levels || m.net.outputs() != m.levels {
        return Err(Error::Config("predictor layers are inconsistent".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(order: usize, levels: usize) -> MarkovConfig {
        MarkovConfig { order, bin_edges: (0..=levels).map(|v| v as f64).collect(), ..Default::default() }
    }

    #[test]
    fn discretize_bins_and_clamps() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(discretize(0.5, &e), 0);
        assert_eq!(discretize(1.0, &e), 1);
        assert_eq!(discretize(-3.0, &e), 0);
        assert_eq!(discretize(9.0, &e), 1);
    }

    #[test]
    fn uniform_samples_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let ones = (0..n).filter(|_| discretize(rng.random_range(0.0..2.0), &[0.0, 1.0, 2.0]) == 1).count();
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones as f64 - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn deterministic_cycle() {
        let seq: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let t = estimate_frequencies(&[seq], &cfg(1, 2)).unwrap();
        assert_eq!(t.frequencies[&vec![0]], vec![0.0, 1.0]);
        assert_eq!(t.frequencies[&vec![1]], vec![1.0, 0.0]);
    }

    #[test]
    fn single_observation_per_context() {
        let t = estimate_frequencies(&[vec![2, 0, 1]], &cfg(1, 3)).unwrap();
        assert_eq!(t.frequencies[&vec![2]], vec![1.0, 0.0, 0.0]);
        assert_eq!(t.frequencies[&vec![0]], vec![0.0, 1.0, 0.0]);
        assert!(!t.frequencies.contains_key(&vec![1]));
        assert!(estimate_frequencies(&[vec![1]], &cfg(1, 3)).is_err());
    }

    #[test]
    fn confidence_values() {
        assert_eq!(confidence_factor(0.0, -0.1), 0.0);
        assert_abs_diff_eq!(confidence_factor(10.0, -0.1), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert!(confidence_factor(1e4, -0.1) > 1.0 - 1e-12);
    }

    #[test]
    fn smoothing_hand_example() {
        let v = smooth_vector(&[1.0, 0.0, 0.0], 0.5, SmoothingMode::Renormalized, 1e-9);
        for (a, b) in v.iter().zip([0.6, 0.2, 0.2]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let raw = smooth_vector(&[1.0, 0.0, 0.0], 0.5, SmoothingMode::Verbatim, 1e-9);
        assert_eq!(raw, vec![0.75, 0.25, 0.25]);
        assert_eq!(smooth_vector(&[0.5, 0.5], 0.9, SmoothingMode::Renormalized, 1e-9), vec![0.5, 0.5]);
        assert_eq!(smooth_vector(&[1.0, 0.0], 0.0, SmoothingMode::Renormalized, 1e-9), vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn smoothed_vectors_are_distributions(w in proptest::collection::vec(0u32..5, 2..6), f in 0.0f64..1.0) {
            prop_assume!(w.iter().any(|&v| v > 0));
            let s: u32 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|&v| v as f64 / s as f64).collect();
            let out = smooth_vector(&p, f, SmoothingMode::Renormalized, 1e-9);
            prop_assert!(out.iter().all(|&v| v >= 0.0));
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if f > 0.0 {
                prop_assert!(p.iter().zip(&out).all(|(a, b)| *a > 0.0 || *b > 0.0));
            }
        }

        #[test]
        fn more_counts_move_more_mass(c in 1u32..100) {
            let p = [0.7, 0.3, 0.0];
            let lo = smooth_vector(&p, confidence_factor(c as f64, -0.1), SmoothingMode::Renormalized, 1e-9);
            let hi = smooth_vector(&p, confidence_factor((c + 1) as f64, -0.1), SmoothingMode::Renormalized, 1e-9);
            prop_assert!(hi[2] >= lo[2]);
        }
    }

    #[test]
    fn single_context_fit() {
        let mut t = TransitionTable { levels: 3, ..Default::default() };
        t.frequencies.insert(vec![1], vec![0.2, 0.5, 0.3]);
        t.counts.insert(vec![1], vec![2, 5, 3]);
        let m = train_predictor(&t, &PredictorHyper::default()).unwrap();
        assert!(m.max_tv < 0.01, "{}", m.max_tv);
        let d = m.distribution(&[0]);
        assert!(d.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_state_chain_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = [[0.8, 0.2], [0.35, 0.65]];
        let mut s = vec![0usize];
        for _ in 0..20_000 {
            let cur = *s.last().unwrap();
            s.push(if rng.random::<f64>() < p[cur][0] { 0 } else { 1 });
        }
        let c = cfg(1, 2);
        let t = smooth_frequencies(&estimate_frequencies(&[s], &c).unwrap(), &c);
        let m = train_predictor(&t, &PredictorHyper::default()).unwrap();
        for k in 0..2 {
            assert!(total_variation(&m.distribution(&[k]), &p[k]) < 0.02);
        }
    }

    #[test]
    fn deterministic_horizon_one() {
        let seq: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let t = estimate_frequencies(&[seq], &cfg(1, 3)).unwrap();
        assert_eq!(worst_case_horizon(&t, &[0], 1, Pessimism::default()), 1);
        assert_eq!(worst_case_horizon(&t, &[1], 1, Pessimism::default()), 2);
    }

    #[test]
    fn absorbing_worst_state() {
        let mut t = TransitionTable { levels: 3, ..Default::default() };
        t.frequencies.insert(vec![0], vec![0.5, 0.2, 0.3]);
        t.frequencies.insert(vec![2], vec![0.0, 0.0, 1.0]);
        t.frequencies.insert(vec![1], vec![1.0, 0.0, 0.0]);
        for h in 1..5 {
            assert_eq!(worst_case_horizon(&t, &[0], h, Pessimism::default()), 2);
        }
    }

    /// Every level sequence of length `h`, scored by its longest admitted prefix.
    fn brute_force(t: &TransitionTable, ctx: &[usize], h: usize, thr: f64) -> usize {
        let l = t.levels;
        let mut worst = 0;
        for code in 0..l.pow(h as u32) {
            let path: Vec<usize> = (0..h).map(|i| (code / l.pow(i as u32)) % l).collect();
            let mut c = ctx.to_vec();
            for &s in &path {
                if t.next(&c)[s] <= thr {
                    break;
                }
                worst = worst.max(s);
                c.remove(0);
                c.push(s);
            }
        }
        worst
    }

    #[test]
    fn horizon_matches_tree_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let mut t = TransitionTable { levels: 4, ..Default::default() };
            for a in 0..4 {
                for b in 0..4 {
                    let w: Vec<f64> = (0..4).map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random::<f64>() }).collect();
                    let s: f64 = w.iter().sum::<f64>().max(1e-9);
                    t.frequencies.insert(vec![a, b], w.iter().map(|v| v / s).collect());
                }
            }
            for h in 1..5 {
                let ctx = [rng.random_range(0..4), rng.random_range(0..4)];
                assert_eq!(worst_case_horizon(&t, &ctx, h, Pessimism::Threshold(0.05)), brute_force(&t, &ctx, h, 0.05));
            }
        }
    }

    #[test]
    fn samples_csv_roundtrip_and_model_persistence() {
        let s = vec![ParameterSample { t: 0.0, noise_level: 1.5, n: 6.0, lambda: 1e-3 }, ParameterSample { t: 0.1, noise_level: 0.0, n: 7.0, lambda: 2e-3 }];
        let mut buf = Vec::new();
        write_samples_csv(&s, &mut buf).unwrap();
        assert_eq!(read_samples_csv(&buf[..]).unwrap(), s);
        let seq: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let t = estimate_frequencies(&[seq], &cfg(1, 2)).unwrap();
        let m = train_predictor(&t, &PredictorHyper { train: TrainOptions { epochs: 50, ..PredictorHyper::default().train }, ..Default::default() }).unwrap();
        let mut out = Vec::new();
        save_model(&m, &mut out).unwrap();
        assert_eq!(load_model(&out[..]).unwrap(), m);
    }
}
