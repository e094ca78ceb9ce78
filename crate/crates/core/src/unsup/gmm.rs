use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kmeans::{fit_kmeans, nearest, KMeansConfig};
use crate::error::{check_dim, Error, Result};
use crate::matrix::{argmax, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub k: usize,
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { k: 4, ridge: 1e-6, tol: 1e-3, max_iter: 100 }
    }
}

/// Full-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Matrix,
    /// Row-major d x d covariance per component.
    pub covariances: Vec<Vec<f64>>,
    /// Total training log-likelihood at every E-step.
    #[serde(skip)]
    pub log_likelihood_trace: Vec<f64>,
    #[serde(skip)]
    chol: Vec<Component>,
}

/// Cached Cholesky factor and log-normaliser of one component.
#[derive(Debug, Clone, PartialEq, Default)]
struct Component {
    l: DMatrix<f64>,
    log_norm: f64,
}

fn factor(cov: &[f64], d: usize, which: usize) -> Result<Component> {
    let m = DMatrix::from_row_slice(d, d, cov);
    let chol = m.cholesky().ok_or_else(|| {
        Error::numerical(format!("GMM component {which} has a singular covariance despite the ridge"))
    })?;
    let l = chol.l();
    let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    if !log_det.is_finite() {
        return Err(Error::numerical(format!("GMM component {which} has a degenerate covariance")));
    }
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Ok(Component { l, log_norm })
}

fn log_pdf(c: &Component, mean: &[f64], x: &[f64]) -> f64 {
    let diff = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, b)| a - b));
    let z = c.l.solve_lower_triangular(&diff).expect("cholesky factor is invertible");
    c.log_norm - 0.5 * z.norm_squared()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn dim(&self) -> usize {
        self.means.cols()
    }

    fn refresh(&mut self) -> Result<()> {
        let d = self.dim();
        self.chol = self
            .covariances
            .iter()
            .enumerate()
            .map(|(i, c)| factor(c, d, i))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Rebuilds cached factors after deserialisation.
    pub(crate) fn prepare(&mut self) -> Result<()> {
        if self.chol.len() != self.k() {
            self.refresh()?;
        }
        Ok(())
    }

    fn weighted_log_densities(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|c| self.weights[c].ln() + log_pdf(&self.chol[c], self.means.row(c), x))
            .collect()
    }

    /// Posterior responsibilities; sums to 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut fresh;
        let model = if self.chol.len() == self.k() {
            self
        } else {
            fresh = self.clone();
            fresh.refresh()?;
            &fresh
        };
        let lw = model.weighted_log_densities(x);
        let lse = log_sum_exp(&lw);
        Ok(lw.iter().map(|v| (v - lse).exp()).collect())
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

fn m_step(
    x: &Matrix,
    resp: &Matrix,
    ridge: f64,
) -> (Vec<f64>, Matrix, Vec<Vec<f64>>) {
    let (n, d, k) = (x.rows(), x.cols(), resp.cols());
    let mut nk = vec![0.0; k];
    let mut means = Matrix::zeros(k, d);
    for i in 0..n {
        for c in 0..k {
            let r = resp.get(i, c);
            nk[c] += r;
            means.row_mut(c).iter_mut().zip(x.row(i)).for_each(|(m, v)| *m += r * v);
        }
    }
    // guards components that lost every point
    let nk: Vec<f64> = nk.iter().map(|v| v + 10.0 * f64::EPSILON).collect();
    for c in 0..k {
        means.row_mut(c).iter_mut().for_each(|m| *m /= nk[c]);
    }
    let mut covs = vec![vec![0.0; d * d]; k];
    for i in 0..n {
        for c in 0..k {
            let r = resp.get(i, c);
            if r == 0.0 {
                continue;
            }
            let mu = means.row(c);
            let row = x.row(i);
            for a in 0..d {
                let da = row[a] - mu[a];
                for b in 0..d {
                    covs[c][a * d + b] += r * da * (row[b] - mu[b]);
                }
            }
        }
    }
    for c in 0..k {
        for a in 0..d {
            for b in 0..d {
                covs[c][a * d + b] /= nk[c];
            }
            covs[c][a * d + a] += ridge;
        }
    }
    let weights = nk.iter().map(|v| v / n as f64).collect();
    (weights, means, covs)
}

/// EM with full covariances, initialised from k-means.
pub fn fit_gmm(x: &Matrix, cfg: &GmmConfig, seed: u64) -> Result<GmmModel> {
    let (n, k) = (x.rows(), cfg.k);
    if k == 0 || n < k {
        return Err(Error::data(format!("GMM needs at least k={k} rows, got {n}")));
    }
    let km = fit_kmeans(x, &KMeansConfig { k, ..Default::default() }, seed)?;
    let mut resp = Matrix::zeros(n, k);
    for i in 0..n {
        resp.set(i, nearest(&km.centroids, x.row(i)).0, 1.0);
    }
    let (weights, means, covariances) = m_step(x, &resp, cfg.ridge);
    let mut model = GmmModel {
        weights,
        means,
        covariances,
        log_likelihood_trace: Vec::new(),
        chol: Vec::new(),
    };
    model.refresh()?;

    for _ in 0..cfg.max_iter {
        let mut ll = 0.0;
        for i in 0..n {
            let lw = model.weighted_log_densities(x.row(i));
            let lse = log_sum_exp(&lw);
            ll += lse;
            for c in 0..k {
                resp.set(i, c, (lw[c] - lse).exp());
            }
        }
        if !ll.is_finite() {
            return Err(Error::numerical("GMM log-likelihood is not finite"));
        }
        let gain = model.log_likelihood_trace.last().map(|prev| ll - prev);
        model.log_likelihood_trace.push(ll);
        if gain.is_some_and(|g| g < cfg.tol) {
            break;
        }
        let (w, m, c) = m_step(x, &resp, cfg.ridge);
        let prev = std::mem::replace(&mut model.covariances, c);
        model.weights = w;
        model.means = m;
        if let Err(e) = model.refresh() {
            model.covariances = prev;
            return Err(e);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::blobs;

    #[test]
    fn separated_blobs_have_confident_posteriors() {
        let x = blobs(4, &[(0.0, 0.0), (8.0, 8.0)], 100, 0.7);
        let m = fit_gmm(&x, &GmmConfig { k: 2, ..Default::default() }, 4).unwrap();
        let a = m.assign(x.row(0)).unwrap();
        for i in 0..200 {
            let p = m.predict_proba(x.row(i)).unwrap();
            let own = if i < 100 { a } else { 1 - a };
            assert!(p[own] >= 0.99, "sample {i}: {p:?}");
        }
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        for seed in 0..5 {
            let x = blobs(10 + seed, &[(0.0, 0.0), (3.0, 1.0), (0.0, 4.0), (2.5, 2.5)], 50, 0.9);
            let m = fit_gmm(&x, &GmmConfig::default(), seed).unwrap();
            let t = &m.log_likelihood_trace;
            assert!(t.len() >= 2);
            assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{t:?}");
        }
    }

    #[test]
    fn posterior_sums_to_one() {
        let x = blobs(1, &[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)], 20, 0.5);
        let m = fit_gmm(&x, &GmmConfig::default(), 1).unwrap();
        for q in [[0.0, 0.0], [100.0, -50.0], [1.0, 1.0]] {
            let p = m.predict_proba(&q).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip_rebuilds_factors() {
        let x = blobs(2, &[(0.0, 0.0), (5.0, 0.0)], 20, 0.5);
        let m = fit_gmm(&x, &GmmConfig { k: 2, ..Default::default() }, 2).unwrap();
        let bytes = bincode::serialize(&m).unwrap();
        let mut back: GmmModel = bincode::deserialize(&bytes).unwrap();
        back.prepare().unwrap();
        assert_eq!(back.predict_proba(&[1.0, 1.0]).unwrap(), m.predict_proba(&[1.0, 1.0]).unwrap());
    }

    #[test]
    fn duplicated_points_stay_finite_thanks_to_ridge() {
        let mut rows = vec![vec![1.0, 1.0]; 10];
        rows.extend(vec![vec![5.0, 5.0]; 10]);
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_gmm(&x, &GmmConfig { k: 2, ..Default::default() }, 0).unwrap();
        assert!(m.log_likelihood_trace.iter().all(|v| v.is_finite()));
    }
}
