use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::corpus::NUM_CLASSES;
use crate::error::{check_dim, Error, Result};
use crate::matrix::{dot, Matrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 50, lambda: 1e-4, seed: seed::DEFAULT_SEED }
    }
}

/// One-vs-rest linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `classes x D`.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub config: SvmConfig,
    /// Regularised hinge objective summed over the binary problems, measured
    /// on the training set after every epoch.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

pub fn hinge(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

fn objective(w: &Matrix, b: &[f64], x: &Matrix, y: &[usize], lambda: f64) -> f64 {
    let n = x.rows() as f64;
    (0..w.rows())
        .map(|c| {
            let reg = 0.5 * lambda * dot(w.row(c), w.row(c));
            let loss: f64 = x
                .iter_rows()
                .zip(y)
                .map(|(r, &l)| hinge(sign(l == c) * (dot(w.row(c), r) + b[c])))
                .sum();
            reg + loss / n
        })
        .sum()
}

fn sign(positive: bool) -> f64 {
    if positive {
        1.0
    } else {
        -1.0
    }
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.weights.iter_rows().zip(&self.biases).map(|(w, b)| dot(w, x) + b).collect())
    }
}

/// Per-sample sub-gradient descent on the L2-regularised hinge loss for each
/// class against the rest. The learning rate halves after any epoch whose
/// objective rose.
pub fn train_svm(x: &Matrix, y: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    check_training_set(x.rows(), y)?;
    if !(cfg.learning_rate > 0.0) || cfg.epochs == 0 || cfg.lambda < 0.0 {
        return Err(Error::config("SVM needs a positive learning rate, epochs >= 1 and lambda >= 0"));
    }
    let d = x.cols();
    let mut w = Matrix::zeros(NUM_CLASSES, d);
    let mut b = vec![0.0; NUM_CLASSES];
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut lr = cfg.learning_rate;
    let mut trace: Vec<f64> = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let r = x.row(i);
            for c in 0..NUM_CLASSES {
                let t = sign(y[i] == c);
                let active = t * (dot(w.row(c), r) + b[c]) < 1.0;
                let shrink = 1.0 - lr * cfg.lambda;
                let wc = w.row_mut(c);
                if shrink != 1.0 {
                    wc.iter_mut().for_each(|v| *v *= shrink);
                }
                if active {
                    wc.iter_mut().zip(r).filter(|(_, xv)| **xv != 0.0).for_each(|(v, xv)| *v += lr * t * xv);
                    b[c] += lr * t;
                }
            }
        }
        let obj = objective(&w, &b, x, y, cfg.lambda);
        if !obj.is_finite() {
            return Err(Error::numerical(format!("SVM objective became {obj}")));
        }
        if trace.last().is_some_and(|&prev| obj > prev) {
            lr *= 0.5;
        }
        trace.push(obj);
    }
    Ok(SvmModel { weights: w, biases: b, config: *cfg, objective_trace: trace })
}
