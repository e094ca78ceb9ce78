//! Principal component analysis.
//!
//! Small problems are solved exactly from the covariance (or Gram) matrix.
//! Wide and tall problems, such as a few thousand n-gram columns over
//! thousands of sentences, use block subspace iteration with Rayleigh-Ritz
//! extraction; the covariance is never materialised and zero entries of the
//! (sparse) input are skipped.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::seed;

const EXACT_LIMIT: usize = 600;
const MAX_SUBSPACE_ITERS: usize = 2000;
const RESIDUAL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k x D, orthonormal rows.
    pub components: Matrix,
    /// Non-increasing.
    pub explained_variance: Vec<f64>,
    /// Trace of the sample covariance (n - 1 denominator).
    pub total_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Solver {
    Auto,
    Covariance,
    Gram,
    Subspace,
}

pub fn fit_pca(x: &Matrix, k: usize) -> Result<PcaModel> {
    fit_pca_with(x, k, Solver::Auto)
}

pub(crate) fn fit_pca_with(x: &Matrix, k: usize, solver: Solver) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::data(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::config(format!(
            "PCA with k={k} is impossible for a {n}x{d} matrix (need 1 <= k <= {})",
            n.min(d)
        )));
    }
    let mean = x.column_means();
    let denom = (n - 1) as f64;
    let total_variance = x
        .iter_rows()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum::<f64>()
        / denom;

    let solver = match solver {
        Solver::Auto if d <= EXACT_LIMIT => Solver::Covariance,
        Solver::Auto if n <= EXACT_LIMIT => Solver::Gram,
        Solver::Auto => Solver::Subspace,
        s => s,
    };
    let (mut vecs, vals) = match solver {
        Solver::Covariance => by_covariance(x, &mean, k),
        Solver::Gram => by_gram(x, &mean, k),
        _ => by_subspace(x, &mean, k)?,
    };
    for row in vecs.chunks_mut(d) {
        let mut big = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[big].abs() {
                big = j;
            }
        }
        if row[big] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(PcaModel {
        mean,
        components: Matrix::from_vec(k, d, vecs)?,
        explained_variance: vals.into_iter().map(|v| v.max(0.0)).collect(),
        total_variance,
    })
}

/// Eigenpairs sorted by descending eigenvalue: (values, column indices).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

fn by_covariance(x: &Matrix, mean: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centred = vec![0.0; d];
    for r in x.iter_rows() {
        for j in 0..d {
            centred[j] = r[j] - mean[j];
        }
        for a in 0..d {
            let ca = centred[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let (vals, vecs) = sorted_eigen(cov);
    let mut out = Vec::with_capacity(k * d);
    for c in 0..k {
        out.extend((0..d).map(|r| vecs[(r, c)]));
    }
    (out, vals[..k].to_vec())
}

fn by_gram(x: &Matrix, mean: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let centred: Vec<Vec<f64>> =
        x.iter_rows().map(|r| r.iter().zip(mean).map(|(v, m)| v - m).collect()).collect();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = crate::matrix::dot(&centred[a], &centred[b]) / (n - 1) as f64;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let (vals, u) = sorted_eigen(gram);
    let mut comps = vec![0.0; k * d];
    for c in 0..k {
        let row = &mut comps[c * d..(c + 1) * d];
        for (i, ci) in centred.iter().enumerate() {
            let w = u[(i, c)];
            for j in 0..d {
                row[j] += w * ci[j];
            }
        }
    }
    orthonormalise_rows(&mut comps, k, d);
    (comps, vals[..k].to_vec())
}

/// Modified Gram-Schmidt over the rows of a row-major k x d buffer.
fn orthonormalise_rows(m: &mut [f64], k: usize, d: usize) {
    for i in 0..k {
        for j in 0..i {
            let (head, tail) = m.split_at_mut(i * d);
            let prev = &head[j * d..(j + 1) * d];
            let cur = &mut tail[..d];
            let p = crate::matrix::dot(prev, cur);
            cur.iter_mut().zip(prev).for_each(|(c, q)| *c -= p * q);
        }
        let row = &mut m[i * d..(i + 1) * d];
        let norm = crate::matrix::dot(row, row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// `C Q` for the sample covariance `C` of `x`, with `q` a row-major d x b
/// block. Zero entries of `x` are skipped.
fn cov_times(x: &Matrix, mean: &[f64], q: &[f64], b: usize) -> Vec<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut mq = vec![0.0; b];
    for j in 0..d {
        let qj = &q[j * b..(j + 1) * b];
        mq.iter_mut().zip(qj).for_each(|(m, v)| *m += mean[j] * v);
    }
    let mut y = vec![0.0; n * b];
    for i in 0..n {
        let yi = &mut y[i * b..(i + 1) * b];
        for (j, &v) in x.row(i).iter().enumerate() {
            if v != 0.0 {
                let qj = &q[j * b..(j + 1) * b];
                yi.iter_mut().zip(qj).for_each(|(a, w)| *a += v * w);
            }
        }
        yi.iter_mut().zip(&mq).for_each(|(a, m)| *a -= m);
    }
    let mut ysum = vec![0.0; b];
    let mut z = vec![0.0; d * b];
    for i in 0..n {
        let yi = &y[i * b..(i + 1) * b];
        ysum.iter_mut().zip(yi).for_each(|(s, v)| *s += v);
        for (j, &v) in x.row(i).iter().enumerate() {
            if v != 0.0 {
                let zj = &mut z[j * b..(j + 1) * b];
                zj.iter_mut().zip(yi).for_each(|(a, w)| *a += v * w);
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        let zj = &mut z[j * b..(j + 1) * b];
        for (a, s) in zj.iter_mut().zip(&ysum) {
            *a = (*a - mean[j] * s) / denom;
        }
    }
    z
}

fn thin_q(z: &[f64], d: usize, b: usize) -> Vec<f64> {
    let q = DMatrix::from_row_slice(d, b, z).qr().q();
    let mut out = vec![0.0; d * b];
    for r in 0..d {
        for c in 0..b {
            out[r * b + c] = q[(r, c)];
        }
    }
    out
}

fn by_subspace(x: &Matrix, mean: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    use rand_distr::{Distribution, StandardNormal};
    let (n, d) = (x.rows(), x.cols());
    let b = (k + 10).min(n.min(d));
    let mut rng = seed::rng(0x5043_4121);
    let init: Vec<f64> = (0..d * b).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut q = thin_q(&init, d, b);
    for _ in 0..MAX_SUBSPACE_ITERS {
        let z = cov_times(x, mean, &q, b);
        // Rayleigh quotient T = Q^T C Q
        let mut t = DMatrix::<f64>::zeros(b, b);
        for r in 0..d {
            let qr = &q[r * b..(r + 1) * b];
            let zr = &z[r * b..(r + 1) * b];
            for a in 0..b {
                for c in 0..b {
                    t[(a, c)] += qr[a] * zr[c];
                }
            }
        }
        let t = (&t + t.transpose()) * 0.5;
        let (theta, s) = sorted_eigen(t);
        // Ritz vectors and residuals for the leading k pairs
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let mut vecs = vec![0.0; k * d];
        let mut worst = 0.0f64;
        for c in 0..k {
            let mut res = 0.0;
            for r in 0..d {
                let qr = &q[r * b..(r + 1) * b];
                let zr = &z[r * b..(r + 1) * b];
                let mut v = 0.0;
                let mut cv = 0.0;
                for a in 0..b {
                    v += qr[a] * s[(a, c)];
                    cv += zr[a] * s[(a, c)];
                }
                vecs[c * d + r] = v;
                res += (cv - theta[c] * v).powi(2);
            }
            worst = worst.max(res.sqrt() / scale);
        }
        if worst < RESIDUAL_TOL {
            orthonormalise_rows(&mut vecs, k, d);
            return Ok((vecs, theta[..k].to_vec()));
        }
        q = thin_q(&z, d, b);
    }
    Err(Error::numerical(format!(
        "PCA subspace iteration did not converge in {MAX_SUBSPACE_ITERS} iterations"
    )))
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.components.iter_rows().map(|c| crate::matrix::dot(c, &centred)).collect())
    }

    pub fn transform_matrix(&self, x: &Matrix) -> Result<Matrix> {
        check_dim(self.dim(), x.cols())?;
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.transform(r)).collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.k()));
        }
        Matrix::from_rows(&rows)
    }

    /// `mean + components^T z`.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.k(), z.len())?;
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter_rows().zip(z) {
            out.iter_mut().zip(c).for_each(|(o, v)| *o += w * v);
        }
        Ok(out)
    }
}

pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    model.transform(x)
}
