use serde::{Deserialize, Serialize};

use super::kmeans::nearest;
use crate::error::{check_dim, Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// One merge of the Ward tree: slot `hi` is folded into slot `lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Merge {
    pub lo: usize,
    pub hi: usize,
    pub height: f64,
}

fn ward_cost(wa: f64, ca: &[f64], wb: f64, cb: &[f64]) -> f64 {
    wa * wb / (wa + wb) * sq_dist(ca, cb)
}

/// Full Ward merge sequence over weighted points, sorted by height.
///
/// Nearest-neighbour chain: O(n) memory, O(n^2) cost evaluations. Ties in
/// the neighbour search prefer the chain predecessor, then the lowest slot.
pub(crate) fn ward_tree(points: &Matrix, weights: &[f64]) -> Vec<Merge> {
    let n = points.rows();
    let mut cent: Vec<Vec<f64>> = points.iter_rows().map(|r| r.to_vec()).collect();
    let mut w = weights.to_vec();
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active slot"));
        }
        let (a, b, height) = loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = (usize::MAX, f64::INFINITY);
            for j in (0..n).filter(|&j| active[j] && j != a) {
                let d = ward_cost(w[a], &cent[a], w[j], &cent[j]);
                if d < best.1 {
                    best = (j, d);
                }
            }
            if let Some(p) = prev {
                if ward_cost(w[a], &cent[a], w[p], &cent[p]) <= best.1 {
                    best = (p, ward_cost(w[a], &cent[a], w[p], &cent[p]));
                }
            }
            if Some(best.0) == prev {
                break (a, best.0, best.1);
            }
            chain.push(best.0);
        };
        chain.truncate(chain.len() - 2);
        let (lo, hi) = (a.min(b), a.max(b));
        let total = w[lo] + w[hi];
        let merged: Vec<f64> = cent[lo]
            .iter()
            .zip(&cent[hi])
            .map(|(x, y)| (w[lo] * x + w[hi] * y) / total)
            .collect();
        cent[lo] = merged;
        w[lo] = total;
        active[hi] = false;
        merges.push(Merge { lo, hi, height });
        remaining -= 1;
    }
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    merges
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Flat labels after applying the `n - k` lowest merges. Clusters are
/// numbered by their smallest member index.
pub(crate) fn cut(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n - k) {
        let (a, b) = (find(&mut parent, m.lo), find(&mut parent, m.hi));
        parent[a.max(b)] = a.min(b);
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Weighted mean of each labelled group.
pub(crate) fn group_centroids(points: &Matrix, weights: &[f64], labels: &[usize], k: usize) -> Matrix {
    let mut c = Matrix::zeros(k, points.cols());
    let mut tot = vec![0.0; k];
    for (i, &l) in labels.iter().enumerate() {
        tot[l] += weights[i];
        c.row_mut(l).iter_mut().zip(points.row(i)).for_each(|(s, v)| *s += weights[i] * v);
    }
    for (l, t) in tot.iter().enumerate() {
        c.row_mut(l).iter_mut().for_each(|s| *s /= t);
    }
    c
}

/// Ward clustering cut at k, plus centroids for out-of-sample assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgglomerativeModel {
    pub centroids: Matrix,
    /// Tree labels of the fitting rows.
    #[serde(skip)]
    pub train_labels: Vec<usize>,
}

impl AgglomerativeModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    /// Nearest stored centroid.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.centroids.cols(), x.len())?;
        Ok(nearest(&self.centroids, x).0)
    }
}

pub fn fit_agglomerative(x: &Matrix, k: usize) -> Result<AgglomerativeModel> {
    let n = x.rows();
    if k == 0 || n < k {
        return Err(Error::data(format!("agglomerative clustering needs at least k={k} rows, got {n}")));
    }
    let weights = vec![1.0; n];
    let merges = ward_tree(x, &weights);
    let train_labels = cut(n, &merges, k);
    let centroids = group_centroids(x, &weights, &train_labels, k);
    Ok(AgglomerativeModel { centroids, train_labels })
}
