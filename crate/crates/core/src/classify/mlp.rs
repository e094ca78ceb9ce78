use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::corpus::NUM_CLASSES;
use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::nn::{relu, relu_back, softmax, train_loop, Dense, Differentiable, OptimizerKind, TrainConfig};
use crate::seed;

const H1: usize = 256;
const H2: usize = 64;
pub const DROPOUT: f64 = 0.3;

pub fn default_nn_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        epochs: 40,
        batch_size: 64,
        seed: seed::DEFAULT_SEED,
        optimizer: OptimizerKind::Adam,
        halve_on_increase: true,
    }
}

/// Dense network: 256 ReLU, dropout, 64 ReLU, softmax over the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModel {
    l1: Dense,
    l2: Dense,
    l3: Dense,
    params: Vec<f64>,
    pub config: TrainConfig,
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

/// Rows, targets and, optionally, fixed inverted-dropout masks (one per row,
/// length 256). Without masks dropout is off.
#[derive(Debug, Clone)]
pub struct NnBatch {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub masks: Option<Vec<Vec<f64>>>,
}

impl NnModel {
    pub fn new(dim: usize, config: TrainConfig) -> Self {
        let mut at = 0;
        let l1 = Dense::alloc(&mut at, dim, H1);
        let l2 = Dense::alloc(&mut at, H1, H2);
        let l3 = Dense::alloc(&mut at, H2, NUM_CLASSES);
        let mut params = vec![0.0; at];
        let mut rng = seed::rng(seed::derive(config.seed, "nn-init"));
        for l in [l1, l2, l3] {
            l.init(&mut params, &mut rng);
        }
        Self { l1, l2, l3, params, config, loss_trace: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.l1.inp
    }

    /// Class probabilities with dropout disabled.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.forward(x, None).probs)
    }

    fn forward(&self, x: &[f64], mask: Option<&[f64]>) -> Trace {
        let p = &self.params;
        let mut h1 = vec![0.0; H1];
        self.l1.forward(p, x, &mut h1);
        relu(&mut h1);
        if let Some(m) = mask {
            h1.iter_mut().zip(m).for_each(|(a, k)| *a *= k);
        }
        let mut h2 = vec![0.0; H2];
        self.l2.forward(p, &h1, &mut h2);
        relu(&mut h2);
        let mut z = vec![0.0; NUM_CLASSES];
        self.l3.forward(p, &h2, &mut z);
        Trace { h1, h2, probs: softmax(&z) }
    }

    fn evaluate(&self, b: &NnBatch, want_grad: bool) -> (f64, Vec<f64>) {
        let p = &self.params;
        let mut g = if want_grad { vec![0.0; p.len()] } else { Vec::new() };
        let inv = 1.0 / b.x.len() as f64;
        let mut loss = 0.0;
        for (i, (x, &y)) in b.x.iter().zip(&b.y).enumerate() {
            let mask = b.masks.as_ref().map(|m| m[i].as_slice());
            let t = self.forward(x, mask);
            loss -= t.probs[y].max(f64::MIN_POSITIVE).ln();
            if !want_grad {
                continue;
            }
            let mut dz = t.probs.clone();
            dz[y] -= 1.0;
            dz.iter_mut().for_each(|v| *v *= inv);
            let mut dh2 = vec![0.0; H2];
            self.l3.backward(p, &t.h2, &dz, &mut g, Some(&mut dh2));
            relu_back(&mut dh2, &t.h2);
            let mut dh1 = vec![0.0; H1];
            self.l2.backward(p, &t.h1, &dh2, &mut g, Some(&mut dh1));
            // h1 is post-mask, so dropped units are already zero here
            relu_back(&mut dh1, &t.h1);
            if let Some(m) = mask {
                dh1.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
            }
            self.l1.backward(p, x, &dh1, &mut g, None);
        }
        (loss * inv, g)
    }
}

struct Trace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    probs: Vec<f64>,
}

impl Differentiable for NnModel {
    type Batch = NnBatch;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss(&self, b: &NnBatch) -> f64 {
        self.evaluate(b, false).0
    }

    fn loss_and_grad(&self, b: &NnBatch) -> (f64, Vec<f64>) {
        self.evaluate(b, true)
    }
}

/// Inverted-dropout mask: kept units are scaled by `1 / (1 - rate)`.
pub(crate) fn dropout_mask(rng: &mut seed::Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

/// Mini-batch training on cross-entropy with dropout after the first layer.
pub fn train_nn(x: &Matrix, y: &[usize], cfg: &TrainConfig) -> Result<NnModel> {
    check_training_set(x.rows(), y)?;
    cfg.validate()?;
    let mut model = NnModel::new(x.cols(), *cfg);
    let mut params = std::mem::take(&mut model.params);
    let trace = train_loop(x.rows(), cfg, &mut params, |rows, p, rng| {
        let batch = NnBatch {
            x: rows.iter().map(|&r| x.row(r).to_vec()).collect(),
            y: rows.iter().map(|&r| y[r]).collect(),
            masks: Some(rows.iter().map(|_| dropout_mask(rng, H1, DROPOUT)).collect()),
        };
        model.params = p.to_vec();
        Ok(model.evaluate(&batch, true))
    })
    .map_err(|e| match e {
        Error::Numerical(m) => Error::numerical(format!("NN training: {m}")),
        other => other,
    })?;
    model.params = params;
    model.loss_trace = trace;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::argmax;
    use crate::nn::gradient_check;

    fn random_batch(n: usize, d: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if rng.random::<f64>() < 0.3 { rng.random::<f64>() } else { 0.0 }).collect())
            .collect();
        let y = (0..n).map(|i| i % NUM_CLASSES).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn gradient_check_with_and_without_dropout() {
        let (x, y) = random_batch(4, 30, 1);
        let mut m = NnModel::new(30, default_nn_config());
        let mut rng = seed::rng(9);
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| r.to_vec()).collect();
        let plain = NnBatch { x: rows.clone(), y: y.clone(), masks: None };
        assert!(gradient_check(&mut m, &plain, 3) <= 1e-4);
        let masked = NnBatch { x: rows, y, masks: Some((0..4).map(|_| dropout_mask(&mut rng, H1, DROPOUT)).collect()) };
        let err = gradient_check(&mut m, &masked, 4);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = NnModel::new(5, default_nn_config());
        for x in [[0.0; 5], [1e3, -1e3, 4.0, 0.5, 2.0]] {
            let p = m.predict_proba(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(m.predict_proba(&[0.0; 4]).is_err());
    }

    #[test]
    fn overfits_fifty_random_samples() {
        let (x, y) = random_batch(50, 200, 2);
        let cfg = TrainConfig { epochs: 200, batch_size: 10, optimizer: OptimizerKind::Adam, ..default_nn_config() };
        let m = train_nn(&x, &y, &cfg).unwrap();
        let hits = x.iter_rows().zip(&y).filter(|(r, &l)| argmax(&m.predict_proba(r).unwrap()) == l).count();
        assert!(hits >= 50, "{hits}/50");
    }

    #[test]
    fn deterministic_training() {
        let (x, y) = random_batch(40, 20, 3);
        let cfg = TrainConfig { epochs: 3, ..default_nn_config() };
        assert_eq!(train_nn(&x, &y, &cfg).unwrap().params, train_nn(&x, &y, &cfg).unwrap().params);
    }

    #[test]
    fn dropout_mask_keeps_expectation() {
        let m = dropout_mask(&mut seed::rng(0), 100_000, DROPOUT);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
