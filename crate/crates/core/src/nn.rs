//! Building blocks shared by the hand-differentiated networks: flat
//! parameter layouts, dense layers, optimisers, a mini-batch training loop
//! and a finite-difference gradient checker.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense layer stored inside a flat parameter vector. Weights are laid out
/// input-major (`w[i * out + j]`) so sparse inputs touch contiguous rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct Dense {
    pub inp: usize,
    pub out: usize,
    pub off: usize,
}

impl Dense {
    /// Reserves space at `*cursor` and advances it.
    pub fn alloc(cursor: &mut usize, inp: usize, out: usize) -> Self {
        let d = Self { inp, out, off: *cursor };
        *cursor += d.len();
        d
    }

    pub fn len(&self) -> usize {
        self.inp * self.out + self.out
    }

    fn bias_off(&self) -> usize {
        self.off + self.inp * self.out
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, p: &mut [f64], rng: &mut seed::Rng) {
        let lim = (6.0 / (self.inp + self.out) as f64).sqrt();
        for w in &mut p[self.off..self.bias_off()] {
            *w = rng.random_range(-lim..lim);
        }
        p[self.bias_off()..self.off + self.len()].fill(0.0);
    }

    /// `y = W^T x + b`; zero inputs are skipped.
    pub fn forward(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inp);
        y.copy_from_slice(&p[self.bias_off()..self.off + self.len()]);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &p[self.off + i * self.out..self.off + (i + 1) * self.out];
            y.iter_mut().zip(row).for_each(|(a, w)| *a += xi * w);
        }
    }

    /// Accumulates parameter gradients into `g` and, when asked, writes the
    /// input gradient into `dx`.
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64], dx: Option<&mut [f64]>) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let grow = &mut g[self.off + i * self.out..self.off + (i + 1) * self.out];
            grow.iter_mut().zip(dy).for_each(|(a, d)| *a += xi * d);
        }
        let b = self.bias_off();
        g[b..b + self.out].iter_mut().zip(dy).for_each(|(a, d)| *a += d);
        if let Some(dx) = dx {
            for (i, v) in dx.iter_mut().enumerate() {
                let row = &p[self.off + i * self.out..self.off + (i + 1) * self.out];
                *v = row.iter().zip(dy).map(|(w, d)| w * d).sum();
            }
        }
    }
}

pub(crate) fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|a| *a = a.max(0.0));
}

/// Zeroes gradient entries whose activation was clamped by ReLU.
pub(crate) fn relu_back(dy: &mut [f64], y: &[f64]) {
    dy.iter_mut().zip(y).for_each(|(d, &a)| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Mini-batch training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Halve the learning rate whenever the epoch loss goes up.
    pub halve_on_increase: bool,
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch size and epochs must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) struct Optimizer {
    kind: OptimizerKind,
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n], vec![0.0; n]),
        };
        Self { kind, lr, m, v, t: 0 }
    }

    pub fn step(&mut self, p: &mut [f64], g: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => p.iter_mut().zip(g).for_each(|(w, d)| *w -= self.lr * d),
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for i in 0..p.len() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
                    p[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Shuffled mini-batch loop. `batch` returns the mean loss and gradient of
/// the given rows; the returned trace holds the mean batch loss per epoch.
pub(crate) fn train_loop<F>(n: usize, cfg: &TrainConfig, params: &mut [f64], mut batch: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize], &[f64], &mut seed::Rng) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = batch(rows, params, &mut rng)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {b}: loss={loss}"
                )));
            }
            opt.step(params, &grad);
            total += loss;
            batches += 1;
        }
        let mean = total / batches.max(1) as f64;
        if cfg.halve_on_increase && trace.last().is_some_and(|&prev| mean > prev) {
            opt.lr *= 0.5;
        }
        trace.push(mean);
    }
    Ok(trace)
}

/// A model whose loss on a fixed batch is a deterministic function of a flat
/// parameter vector.
pub trait Differentiable {
    type Batch;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn loss(&self, batch: &Self::Batch) -> f64;
    fn loss_and_grad(&self, batch: &Self::Batch) -> (f64, Vec<f64>);
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
pub const GRAD_CHECK_SAMPLES: usize = 200;

/// Maximum relative error between analytic and central-difference gradients
/// over a seeded sample of parameters. The denominator is floored at 1e-6 so
/// gradients that are zero on both sides do not divide by zero.
pub fn gradient_check<M: Differentiable>(model: &mut M, batch: &M::Batch, seed: u64) -> f64 {
    let (_, analytic) = model.loss_and_grad(batch);
    let n = model.params().len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    idx.truncate(GRAD_CHECK_SAMPLES);
    let mut worst = 0.0f64;
    for i in idx {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + GRAD_CHECK_STEP;
        let up = model.loss(batch);
        model.params_mut()[i] = orig - GRAD_CHECK_STEP;
        let down = model.loss(batch);
        model.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two dense layers with a ReLU and squared loss; small enough to check
    /// every parameter.
    struct Tiny {
        l1: Dense,
        l2: Dense,
        p: Vec<f64>,
    }

    impl Differentiable for Tiny {
        type Batch = Vec<(Vec<f64>, f64)>;
        fn params(&self) -> &[f64] {
            &self.p
        }
        fn params_mut(&mut self) -> &mut [f64] {
            &mut self.p
        }
        fn loss(&self, b: &Self::Batch) -> f64 {
            self.loss_and_grad(b).0
        }
        fn loss_and_grad(&self, b: &Self::Batch) -> (f64, Vec<f64>) {
            let mut g = vec![0.0; self.p.len()];
            let mut loss = 0.0;
            for (x, t) in b {
                let mut h = vec![0.0; 5];
                self.l1.forward(&self.p, x, &mut h);
                relu(&mut h);
                let mut y = [0.0];
                self.l2.forward(&self.p, &h, &mut y);
                loss += (y[0] - t).powi(2);
                let dy = [2.0 * (y[0] - t)];
                let mut dh = vec![0.0; 5];
                self.l2.backward(&self.p, &h, &dy, &mut g, Some(&mut dh));
                relu_back(&mut dh, &h);
                self.l1.backward(&self.p, x, &dh, &mut g, None);
            }
            (loss, g)
        }
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut at = 0;
        let l1 = Dense::alloc(&mut at, 3, 5);
        let l2 = Dense::alloc(&mut at, 5, 1);
        let mut p = vec![0.0; at];
        let mut rng = seed::rng(1);
        l1.init(&mut p, &mut rng);
        l2.init(&mut p, &mut rng);
        p.iter_mut().for_each(|v| *v += 0.05);
        let mut m = Tiny { l1, l2, p };
        let batch = vec![(vec![0.3, -1.0, 0.0], 0.5), (vec![1.2, 0.4, 2.0], -1.0)];
        assert!(gradient_check(&mut m, &batch, 0) < 1e-6);
    }

    #[test]
    fn forward_skipping_zeros_equals_dense_product() {
        let mut at = 0;
        let l = Dense::alloc(&mut at, 4, 3);
        let p: Vec<f64> = (0..at).map(|i| i as f64 * 0.1 - 0.4).collect();
        let x = [0.0, 2.0, 0.0, -1.0];
        let mut y = [0.0; 3];
        l.forward(&p, &x, &mut y);
        for j in 0..3 {
            let want: f64 = (0..4).map(|i| p[i * 3 + j] * x[i]).sum::<f64>() + p[12 + j];
            assert!((y[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, -1000.0, 3.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn adam_moves_against_the_gradient() {
        let mut o = Optimizer::new(OptimizerKind::Adam, 0.1, 2);
        let mut p = vec![1.0, -1.0];
        o.step(&mut p, &[2.0, -3.0]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn loop_rejects_bad_config_and_nan() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 2,
            batch_size: 2,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            halve_on_increase: true,
        };
        let mut p = vec![0.0];
        let err = train_loop(4, &cfg, &mut p, |_, _, _| Ok((f64::NAN, vec![0.0]))).unwrap_err();
        assert!(err.to_string().contains("epoch 0, batch 0"));
        let bad = TrainConfig { batch_size: 0, ..cfg };
        assert!(train_loop(4, &bad, &mut p, |_, _, _| Ok((0.0, vec![0.0]))).is_err());
        // a quadratic bowl converges
        let trace = train_loop(4, &cfg, &mut p, |_, p, _| Ok(((p[0] - 3.0).powi(2), vec![2.0 * (p[0] - 3.0)])))
            .unwrap();
        assert!(trace[1] < trace[0]);
    }
}
