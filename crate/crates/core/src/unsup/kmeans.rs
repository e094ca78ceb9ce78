use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::{argmin, sq_dist, Matrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { k: 4, restarts: 10, max_iter: 300, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Matrix,
    /// Within-cluster sum of squares of the kept restart.
    pub inertia: f64,
    /// Objective after initialisation and after every Lloyd iteration, one
    /// trace per restart.
    #[serde(skip)]
    pub traces: Vec<Vec<f64>>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.centroids.cols(), x.len())?;
        Ok(nearest(&self.centroids, x).0)
    }
}

/// (index, squared distance) of the closest centroid; lowest index on ties.
pub(crate) fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let d: Vec<f64> = centroids.iter_rows().map(|c| sq_dist(c, x)).collect();
    let i = argmin(&d);
    (i, d[i])
}

fn objective(x: &Matrix, centroids: &Matrix) -> f64 {
    x.iter_rows().map(|r| nearest(centroids, r).1).sum()
}

fn kmeans_pp(x: &Matrix, k: usize, rng: &mut seed::Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, r) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

/// One Lloyd run from a k-means++ start. Returns centroids and the objective
/// trace.
fn lloyd(x: &Matrix, cfg: &KMeansConfig, rng: &mut seed::Rng) -> (Matrix, Vec<f64>) {
    let (n, d, k) = (x.rows(), x.cols(), cfg.k);
    let mut centroids = kmeans_pp(x, k, rng);
    let mut trace = vec![objective(x, &centroids)];
    for _ in 0..cfg.max_iter {
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let (c, _) = nearest(&centroids, x.row(i));
            counts[c] += 1;
            sums.row_mut(c).iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let new: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(sq_dist(&new, centroids.row(c)).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        trace.push(objective(x, &centroids));
        if shift < cfg.tol {
            break;
        }
    }
    (centroids, trace)
}

pub fn fit_kmeans(x: &Matrix, cfg: &KMeansConfig, seed: u64) -> Result<KMeansModel> {
    if cfg.k == 0 || x.rows() < cfg.k {
        return Err(Error::data(format!(
            "k-means needs at least k={} rows, got {}",
            cfg.k,
            x.rows()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut best: Option<(Matrix, f64)> = None;
    let mut traces = Vec::with_capacity(cfg.restarts.max(1));
    for _ in 0..cfg.restarts.max(1) {
        let (centroids, trace) = lloyd(x, cfg, &mut rng);
        let inertia = *trace.last().expect("trace is never empty");
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((centroids, inertia));
        }
    }
    let (centroids, inertia) = best.expect("at least one restart");
    Ok(KMeansModel { centroids, inertia, traces })
}
