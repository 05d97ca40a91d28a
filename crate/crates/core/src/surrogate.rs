//! Offline table of hybrid delay bounds and a network that answers
//! "delay bound at timeout probability p" in constant time.

use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{Channel, ChannelBound, HybridConfig};
use crate::mmwave::log_grid;
use crate::nn::{Mlp, TrainOptions, TrainReport};
use crate::presets::per_slot;

pub const MODEL_SCHEMA: &str = "hybrid-v2v/surrogate/v1";
pub const DATASET_HEADER: &str = "p,lambda,n,noise_level,split,delay_slots";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayQuery {
    pub p: f64,
    /// Packets per slot per vehicle.
    pub lambda: f64,
    pub n: u32,
    /// Extra noise power in dB over the nominal channel.
    pub noise_level: f64,
    pub split: f64,
}

impl DelayQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.lambda >= 0.0) || self.n < 2 || !self.noise_level.is_finite() || !(0.0..=1.0).contains(&self.split) {
            return Err(Error::InvalidParameter(format!("bad query {self:?}")));
        }
        Ok(())
    }

    fn features(&self) -> [f64; 5] {
        [self.p.ln(), self.lambda, self.n as f64, self.noise_level, self.split]
    }
}

/// Applies a query's channel inputs to a base configuration. Each dB of extra
/// noise lowers the SNR by 1 dB and widens the shadowing spread by 0.25 dB.
pub fn configure(base: &HybridConfig, q: &DelayQuery) -> HybridConfig {
    let mut c = base.clone().with_n(q.n).with_lambda(q.lambda).with_split(q.split);
    c.mmwave.snr *= 10f64.powf(-q.noise_level / 10.0);
    c.mmwave.v += 0.25 * q.noise_level;
    c
}

/// Smallest `x` on the grid with `ccdf(x) <= p`, refined by one bisection
/// step inside the bracketing cell. `xs` must be increasing.
pub fn invert_ccdf(ccdf: impl Fn(f64) -> Result<f64>, xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("empty inversion grid".into()));
    }
    if ccdf(0.0)? <= p {
        return Ok(0.0);
    }
    // Walk up the grid in strides so the bound is never evaluated far past
    // the answer, then bisect on grid indices inside the last stride.
    const STRIDE: usize = 8;
    let n = xs.len();
    let (mut lo, mut hi) = (None, None);
    let mut i = 0;
    loop {
        if ccdf(xs[i])? <= p {
            hi = Some(i);
            break;
        }
        lo = Some(i);
        if i == n - 1 {
            break;
        }
        i = (i + STRIDE).min(n - 1);
    }
    let Some(mut hi) = hi else {
        return Err(Error::NotReached { p, at_max: ccdf(xs[n - 1])? });
    };
    if let Some(mut l) = lo {
        while hi - l > 1 {
            let mid = (l + hi) / 2;
            if ccdf(xs[mid])? <= p {
                hi = mid;
            } else {
                l = mid;
            }
        }
        lo = Some(l);
    }
    let left = lo.map_or(0.0, |l| xs[l]);
    let mid = 0.5 * (left + xs[hi]);
    Ok(if ccdf(mid)? <= p { mid } else { xs[hi] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub base: HybridConfig,
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub n: Vec<u32>,
    pub noise_level: Vec<f64>,
    pub split: Vec<f64>,
    /// Inversion grid in slots.
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            base: HybridConfig::default(),
            p: vec![0.001, 0.005, 0.01, 0.05, 0.1],
            lambda: [0.05, 0.1, 0.2, 0.3].map(per_slot).to_vec(),
            n: vec![4, 6, 10],
            noise_level: vec![0.0, 1.5, 3.0],
            split: vec![0.3, 0.5, 0.7],
            x_min: 1.0,
            x_max: 1e6,
            x_points: 301,
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.p.len() * self.lambda.len() * self.n.len() * self.noise_level.len() * self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub query: DelayQuery,
    pub delay_slots: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    /// Grid points that produced no label, with the reason.
    pub skipped: Vec<(DelayQuery, String)>,
}

/// Labels every grid point with the inverted hybrid bound. Points where the
/// bound is unusable are skipped and listed.
pub fn generate_dataset(spec: &GridSpec) -> Dataset {
    let xs = log_grid(spec.x_min, spec.x_max, spec.x_points.max(2));
    let mut configs = Vec::new();
    for &lambda in &spec.lambda {
        for &n in &spec.n {
            for &noise_level in &spec.noise_level {
                for &split in &spec.split {
                    configs.push(DelayQuery { p: 0.5, lambda, n, noise_level, split });
                }
            }
        }
    }
    let per_config: Vec<Vec<std::result::Result<DatasetRow, (DelayQuery, String)>>> = configs
        .par_iter()
        .map(|base_q| {
            let cfg = configure(&spec.base, base_q);
            let bound = ChannelBound::new(&cfg, Channel::Hybrid);
            spec.p
                .iter()
                .map(|&p| {
                    let query = DelayQuery { p, ..*base_q };
                    let b = bound.as_ref().map_err(|e| (query, e.to_string()))?;
                    invert_ccdf(|x| b.ccdf(x).map(|d| d.probability), &xs, p)
                        .map(|delay_slots| DatasetRow { query, delay_slots })
                        .map_err(|e| (query, e.to_string()))
                })
                .collect()
        })
        .collect();
    let mut ds = Dataset { rows: Vec::new(), skipped: Vec::new() };
    for r in per_config.into_iter().flatten() {
        match r {
            Ok(row) => ds.rows.push(row),
            Err(s) => ds.skipped.push(s),
        }
    }
    ds
}

pub fn write_dataset_csv(rows: &[DatasetRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{DATASET_HEADER}")?;
    for r in rows {
        let q = &r.query;
        writeln!(out, "{},{},{},{},{},{}", q.p, q.lambda, q.n, q.noise_level, q.split, r.delay_slots)?;
    }
    Ok(())
}

pub fn read_dataset_csv(input: impl BufRead) -> Result<Vec<DatasetRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != DATASET_HEADER {
                return Err(Error::Config(format!("dataset header must be `{DATASET_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Config(format!("dataset line {}: `{line}`", i + 1));
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let query = DelayQuery { p: num(f[0])?, lambda: num(f[1])?, n: f[2].trim().parse().map_err(|_| bad())?, noise_level: num(f[3])?, split: num(f[4])? };
        rows.push(DatasetRow { query, delay_slots: num(f[5])? });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHyper {
    pub hidden: Vec<usize>,
    pub train: TrainOptions,
    pub holdout: f64,
}

impl Default for SurrogateHyper {
    fn default() -> Self {
        Self { hidden: vec![64, 64], train: TrainOptions { epochs: 1500, batch_size: 32, learning_rate: 1e-2, patience: 25, min_learning_rate: 1e-5, seed: 7 }, holdout: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub schema: String,
    pub net: Mlp,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Normalisation of `ln D`.
    pub output_mean: f64,
    pub output_std: f64,
    /// Box spanned by the training queries, in feature space.
    pub box_min: Vec<f64>,
    pub box_max: Vec<f64>,
    /// Distinct `p` values of the training grid, ascending.
    pub p_grid: Vec<f64>,
    /// Report the largest prediction over `p` and every larger grid `p`,
    /// which makes the answer non-increasing in `p` across the grid.
    pub monotone_in_p: bool,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_rows: usize,
    pub holdout_rows: usize,
    /// Mean of `|D̂ - D| / D` over the held-out rows.
    pub holdout_rel_error: f64,
    pub holdout_max_rel_error: f64,
    pub epochs: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub delay_slots: f64,
    /// Set when the query lies outside the training box.
    pub extrapolated: bool,
}

fn mean_std(cols: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = cols.clone().count().max(1) as f64;
    let mean = cols.clone().sum::<f64>() / n;
    let var = cols.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Fits the network on `ln D` with a seeded hold-out split.
pub fn train_mlp(rows: &[DatasetRow], hyper: &SurrogateHyper) -> Result<(SurrogateModel, TrainReport)> {
    if rows.len() < 50 {
        return Err(Error::InvalidParameter(format!("need at least 50 rows, got {}", rows.len())));
    }
    if rows.iter().any(|r| !(r.delay_slots > 0.0)) {
        return Err(Error::InvalidParameter("delay labels must be positive".into()));
    }
    let feats: Vec<[f64; 5]> = rows.iter().map(|r| r.query.features()).collect();
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(hyper.train.seed));
    let n_hold = ((rows.len() as f64) * hyper.holdout).round() as usize;
    let (hold, train) = idx.split_at(n_hold);
    let (mut input_mean, mut input_std) = (vec![0.0; 5], vec![0.0; 5]);
    for k in 0..5 {
        (input_mean[k], input_std[k]) = mean_std(train.iter().map(|&i| feats[i][k]));
    }
    let (output_mean, output_std) = mean_std(train.iter().map(|&i| rows[i].delay_slots.ln()));
    let norm = |f: &[f64; 5]| -> Vec<f64> { (0..5).map(|k| (f[k] - input_mean[k]) / input_std[k]).collect() };
    let xs: Vec<Vec<f64>> = train.iter().map(|&i| norm(&feats[i])).collect();
    let ys: Vec<Vec<f64>> = train.iter().map(|&i| vec![(rows[i].delay_slots.ln() - output_mean) / output_std]).collect();
    let mut dims = vec![5];
    dims.extend(&hyper.hidden);
    dims.push(1);
    let mut net = Mlp::new(&dims, hyper.train.seed)?;
    let report = net.train(&xs, &ys, &hyper.train)?;
    let box_min = (0..5).map(|k| feats.iter().map(|f| f[k]).fold(f64::INFINITY, f64::min)).collect();
    let box_max = (0..5).map(|k| feats.iter().map(|f| f[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut p_grid: Vec<f64> = rows.iter().map(|r| r.query.p).collect();
    p_grid.sort_by(f64::total_cmp);
    p_grid.dedup();
    let mut model = SurrogateModel {
        schema: MODEL_SCHEMA.to_string(),
        net,
        input_mean,
        input_std,
        output_mean,
        output_std,
        box_min,
        box_max,
        p_grid,
        monotone_in_p: true,
        report: FitReport {
            train_rows: train.len(),
            holdout_rows: hold.len(),
            holdout_rel_error: 0.0,
            holdout_max_rel_error: 0.0,
            epochs: report.epochs,
            final_loss: report.losses.last().copied().unwrap_or(f64::NAN),
        },
    };
    let errs: Vec<f64> = hold.iter().map(|&i| relative_error(&model, &rows[i])).collect();
    if !errs.is_empty() {
        model.report.holdout_rel_error = errs.iter().sum::<f64>() / errs.len() as f64;
        model.report.holdout_max_rel_error = errs.iter().cloned().fold(0.0, f64::max);
    }
    Ok((model, report))
}

pub fn relative_error(model: &SurrogateModel, row: &DatasetRow) -> f64 {
    let d = predict_delay(model, &row.query).delay_slots;
    (d - row.delay_slots).abs() / row.delay_slots
}

/// Network output alone, without the envelope in `p`.
pub fn predict_raw(model: &SurrogateModel, q: &DelayQuery) -> Prediction {
    let f = q.features();
    let x: Vec<f64> = (0..5).map(|k| (f[k] - model.input_mean[k]) / model.input_std[k]).collect();
    let out = model.net.forward(&x)[0];
    let delay_slots = (out * model.output_std + model.output_mean).exp().max(0.0);
    let extrapolated = (0..5).any(|k| f[k] < model.box_min[k] - 1e-12 || f[k] > model.box_max[k] + 1e-12);
    Prediction { delay_slots, extrapolated }
}

pub fn predict_delay(model: &SurrogateModel, q: &DelayQuery) -> Prediction {
    let mut out = predict_raw(model, q);
    if model.monotone_in_p {
        for &p in model.p_grid.iter().filter(|&&p| p > q.p) {
            out.delay_slots = out.delay_slots.max(predict_raw(model, &DelayQuery { p, ..*q }).delay_slots);
        }
    }
    out
}

/// Share of sampled pairs, other inputs equal, where the prediction at the
/// smaller `p` is below the one at the larger `p`. Both `p` values are drawn
/// from `p_values` and differ.
pub fn monotonicity_defect_rate(model: &SurrogateModel, queries: &[DelayQuery], p_values: &[f64], pairs: usize, seed: u64) -> f64 {
    defect_rate_with(|q| predict_delay(model, q).delay_slots, queries, p_values, pairs, seed)
}

/// [`monotonicity_defect_rate`] for any predictor.
pub fn defect_rate_with(predict: impl Fn(&DelayQuery) -> f64, queries: &[DelayQuery], p_values: &[f64], pairs: usize, seed: u64) -> f64 {
    if queries.is_empty() || pairs == 0 || p_values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defects = 0usize;
    for _ in 0..pairs {
        let q = *queries.choose(&mut rng).expect("non-empty");
        let two: Vec<f64> = p_values.choose_multiple(&mut rng, 2).cloned().collect();
        let (small, large) = (two[0].min(two[1]), two[0].max(two[1]));
        let ds = predict(&DelayQuery { p: small, ..q });
        let dl = predict(&DelayQuery { p: large, ..q });
        if ds < dl {
            defects += 1;
        }
    }
    defects as f64 / pairs as f64
}

pub fn save_model(model: &SurrogateModel, out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, model)?;
    Ok(())
}

pub fn load_model(input: impl std::io::Read) -> Result<SurrogateModel> {
    let m: SurrogateModel = serde_json::from_reader(input)?;
    if m.schema != MODEL_SCHEMA {
        return Err(Error::Config(format!("model schema `{}` is not `{MODEL_SCHEMA}`", m.schema)));
    }
    if !m.net.is_consistent() || m.net.inputs() != 5 || m.net.outputs() != 1 {
        return Err(Error::Config("model layers are inconsistent".into()));
    }
    Ok(m)
}
