//! Small dense network with ramp (ReLU) hidden layers and a linear output,
//! trained by mini-batch Adam on mean-squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Length of the window checked for a plateau before the rate is halved.
    pub patience: usize,
    /// Training stops once the rate falls below this.
    pub min_learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 2000, batch_size: 32, learning_rate: 1e-2, patience: 20, min_learning_rate: 1e-6, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Training loss of the kept weights after each epoch.
    pub losses: Vec<f64>,
    pub final_learning_rate: f64,
}

impl Mlp {
    /// He-initialised hidden layers for `dims = [inputs, hidden.., outputs]`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                // The output layer starts at zero so the initial map is flat.
                let scale = if i == last { 0.0 } else { (2.0 / d[0] as f64).sqrt() };
                let normal = Normal::new(0.0, scale).expect("finite scale");
                Layer { inputs: d[0], outputs: d[1], weights: (0..d[0] * d[1]).map(|_| normal.sample(&mut rng)).collect(), biases: vec![0.0; d[1]] }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|d| Layer { inputs: d[0], outputs: d[1], weights: vec![0.0; d[0] * d[1]], biases: vec![0.0; d[1]] })
            .collect();
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn is_consistent(&self) -> bool {
        !self.layers.is_empty()
            && self.layers.windows(2).all(|w| w[0].outputs == w[1].inputs)
            && self.layers.iter().all(|l| {
                l.weights.len() == l.inputs * l.outputs
                    && l.biases.len() == l.outputs
                    && l.weights.iter().chain(&l.biases).all(|v| v.is_finite())
            })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Mean over rows of the per-row summed squared error.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        let s: f64 = xs.iter().zip(ys).map(|(x, y)| self.forward(x).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum();
        s / xs.len().max(1) as f64
    }

    /// Adam with plateau halving. The best weights seen at an epoch end are
    /// kept and returned, so the reported losses never increase.
    pub fn train(&mut self, xs: &[Vec<f64>], ys: &[Vec<f64>], opts: &TrainOptions) -> Result<TrainReport> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParameter("training needs matching, non-empty inputs and targets".into()));
        }
        if xs.iter().any(|x| x.len() != self.inputs()) || ys.iter().any(|y| y.len() != self.outputs()) {
            return Err(Error::InvalidParameter("row width does not match the network".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut adam = Adam::new(self);
        let mut lr = opts.learning_rate;
        let mut best = self.loss(xs, ys);
        if !best.is_finite() {
            return Err(Error::Diverged(best));
        }
        let mut best_net = self.clone();
        let mut stale = 0;
        let mut window_start = best;
        let mut losses = Vec::new();
        let mut grads = Grads::zeros(self);
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(opts.batch_size.max(1)) {
                grads.clear();
                for &i in batch {
                    self.backprop(&xs[i], &ys[i], &mut grads);
                }
                grads.scale(1.0 / batch.len() as f64);
                adam.step(self, &grads, lr);
            }
            let loss = self.loss(xs, ys);
            if !loss.is_finite() {
                *self = best_net.clone();
                adam = Adam::new(self);
                lr *= 0.5;
            } else if loss < best {
                best = loss;
                best_net = self.clone();
            }
            // A plateau is `patience` epochs that gain less than 1% on the
            // best loss at the start of the window.
            stale += 1;
            if stale >= opts.patience {
                if best > window_start * 0.99 {
                    lr *= 0.5;
                }
                stale = 0;
                window_start = best;
            }
            losses.push(best);
            if lr < opts.min_learning_rate {
                break;
            }
        }
        *self = best_net;
        if !best.is_finite() {
            return Err(Error::Diverged(best));
        }
        Ok(TrainReport { epochs: losses.len(), losses, final_learning_rate: lr })
    }

    fn backprop(&self, x: &[f64], y: &[f64], g: &mut Grads) {
        let last = self.layers.len() - 1;
        let mut acts = vec![x.to_vec()];
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            l.apply(acts.last().expect("input is present"), &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        let mut delta: Vec<f64> = acts[last + 1].iter().zip(y).map(|(a, b)| 2.0 * (a - b)).collect();
        for i in (0..=last).rev() {
            let l = &self.layers[i];
            let input = &acts[i];
            for o in 0..l.outputs {
                g.biases[i][o] += delta[o];
                let row = &mut g.weights[i][o * l.inputs..(o + 1) * l.inputs];
                row.iter_mut().zip(input).for_each(|(w, v)| *w += delta[o] * v);
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * delta[o]);
            }
            // Ramp derivative, read off the stored activation.
            prev.iter_mut().zip(input).for_each(|(p, a)| {
                if *a <= 0.0 {
                    *p = 0.0
                }
            });
            delta = prev;
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("bad layer sizes {dims:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Grads {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|v| v.fill(0.0));
    }

    fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten().for_each(|v| *v *= s);
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Mlp) -> Self {
        Self { m: Grads::zeros(net), v: Grads::zeros(net), t: 0 }
    }

    fn step(&mut self, net: &mut Mlp, g: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (i, l) in net.layers.iter_mut().enumerate() {
            let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for k in 0..p.len() {
                    m[k] = Self::B1 * m[k] + (1.0 - Self::B1) * g[k];
                    v[k] = Self::B2 * v[k] + (1.0 - Self::B2) * g[k] * g[k];
                    p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + Self::EPS);
                }
            };
            update(&mut l.weights, &g.weights[i], &mut self.m.weights[i], &mut self.v.weights[i]);
            update(&mut l.biases, &g.biases[i], &mut self.m.biases[i], &mut self.v.biases[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_weights_output_the_bias() {
        let mut net = Mlp::zeros(&[3, 4, 2]).unwrap();
        net.layers[1].biases = vec![0.7, -1.5];
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]), vec![0.7, -1.5]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = Mlp::new(&[3, 5, 4, 2], 3).unwrap();
        let (x, y) = (vec![0.3, -0.8, 1.1], vec![0.5, -0.2]);
        let mut g = Grads::zeros(&net);
        net.backprop(&x, &y, &mut g);
        let h = 1e-6;
        for (li, k) in [(0usize, 4usize), (1, 7), (2, 3)] {
            let mut plus = net.clone();
            plus.layers[li].weights[k] += h;
            let mut minus = net.clone();
            minus.layers[li].weights[k] -= h;
            let fd = (plus.loss(&[x.clone()], &[y.clone()]) - minus.loss(&[x.clone()], &[y.clone()])) / (2.0 * h);
            assert_abs_diff_eq!(g.weights[li][k], fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn learns_a_constant() {
        let xs: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 60.0, (i % 7) as f64 / 7.0]).collect();
        let ys = vec![vec![3.0]; 60];
        let mut net = Mlp::new(&[2, 8, 8, 1], 1).unwrap();
        let r = net.train(&xs, &ys, &TrainOptions { epochs: 300, ..Default::default() }).unwrap();
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
        // Relative error below 1e-3 on the target 3.
        assert!(net.loss(&xs, &ys) < 9e-6);
    }

    #[test]
    fn training_is_deterministic() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0] - 1.0]).collect();
        let run = || {
            let mut n = Mlp::new(&[1, 6, 1], 9).unwrap();
            n.train(&xs, &ys, &TrainOptions { epochs: 50, ..Default::default() }).unwrap();
            n
        };
        assert_eq!(run(), run());
    }
}
