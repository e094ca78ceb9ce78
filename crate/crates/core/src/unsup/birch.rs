use serde::{Deserialize, Serialize};

use super::kmeans::nearest;
use super::ward::{cut, group_centroids, ward_tree};
use crate::error::{check_dim, Error, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirchConfig {
    pub k: usize,
    pub threshold: f64,
    pub branching_factor: usize,
}

impl Default for BirchConfig {
    fn default() -> Self {
        Self { k: 4, threshold: 0.25, branching_factor: 50 }
    }
}

/// Clustering feature: count, linear sum, squared-norm sum.
#[derive(Debug, Clone, PartialEq)]
struct Cf {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Cf {
    fn point(x: &[f64]) -> Self {
        Self { n: 1.0, ls: x.to_vec(), ss: x.iter().map(|v| v * v).sum() }
    }

    fn add(&mut self, o: &Cf) {
        self.n += o.n;
        self.ls.iter_mut().zip(&o.ls).for_each(|(a, b)| *a += b);
        self.ss += o.ss;
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    /// Radius of the subcluster formed by merging `self` and `o`.
    fn merged_radius(&self, o: &Cf) -> f64 {
        let n = self.n + o.n;
        let c2: f64 = self.ls.iter().zip(&o.ls).map(|(a, b)| ((a + b) / n).powi(2)).sum();
        ((self.ss + o.ss) / n - c2).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Entry {
    cf: Cf,
    child: Option<usize>,
}

#[derive(Debug, Clone)]
struct Node {
    entries: Vec<Entry>,
}

/// CF tree held in an arena; node 0 is not necessarily the root.
#[derive(Debug)]
struct CfTree {
    nodes: Vec<Node>,
    root: usize,
    threshold: f64,
    branching: usize,
}

fn closest(entries: &[Entry], c: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        let d = sq_dist(&e.cf.centroid(), c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

impl CfTree {
    fn new(threshold: f64, branching: usize) -> Self {
        Self { nodes: vec![Node { entries: Vec::new() }], root: 0, threshold, branching }
    }

    fn insert(&mut self, x: &[f64]) {
        let cf = Cf::point(x);
        if let Some((a, b)) = self.insert_at(self.root, &cf) {
            self.nodes.push(Node { entries: vec![a, b] });
            self.root = self.nodes.len() - 1;
        }
    }

    fn insert_at(&mut self, node: usize, cf: &Cf) -> Option<(Entry, Entry)> {
        let c = cf.centroid();
        let is_leaf = self.nodes[node].entries.first().is_none_or(|e| e.child.is_none());
        if self.nodes[node].entries.is_empty() {
            self.nodes[node].entries.push(Entry { cf: cf.clone(), child: None });
            return None;
        }
        let i = closest(&self.nodes[node].entries, &c);
        if is_leaf {
            let e = &mut self.nodes[node].entries[i];
            if e.cf.merged_radius(cf) <= self.threshold {
                e.cf.add(cf);
                return None;
            }
            self.nodes[node].entries.push(Entry { cf: cf.clone(), child: None });
        } else {
            let child = self.nodes[node].entries[i].child.expect("inner entry has a child");
            match self.insert_at(child, cf) {
                None => {
                    self.nodes[node].entries[i].cf.add(cf);
                    return None;
                }
                Some((a, b)) => {
                    self.nodes[node].entries[i] = a;
                    self.nodes[node].entries.push(b);
                }
            }
        }
        if self.nodes[node].entries.len() > self.branching {
            Some(self.split(node))
        } else {
            None
        }
    }

    /// Splits around the farthest pair of entries. The first half stays in
    /// `node`, the second moves to a fresh node.
    fn split(&mut self, node: usize) -> (Entry, Entry) {
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let cents: Vec<Vec<f64>> = entries.iter().map(|e| e.cf.centroid()).collect();
        let mut far = (0, 1, -1.0);
        for a in 0..cents.len() {
            for b in a + 1..cents.len() {
                let d = sq_dist(&cents[a], &cents[b]);
                if d > far.2 {
                    far = (a, b, d);
                }
            }
        }
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (i, e) in entries.into_iter().enumerate() {
            let to_left = if i == far.0 {
                true
            } else if i == far.1 {
                false
            } else {
                sq_dist(&cents[i], &cents[far.0]) <= sq_dist(&cents[i], &cents[far.1])
            };
            if to_left { left.push(e) } else { right.push(e) }
        }
        let summary = |es: &[Entry]| {
            let mut cf = es[0].cf.clone();
            es[1..].iter().for_each(|e| cf.add(&e.cf));
            cf
        };
        let (lcf, rcf) = (summary(&left), summary(&right));
        self.nodes[node].entries = left;
        self.nodes.push(Node { entries: right });
        let fresh = self.nodes.len() - 1;
        (Entry { cf: lcf, child: Some(node) }, Entry { cf: rcf, child: Some(fresh) })
    }

    /// Leaf subclusters in depth-first order.
    fn leaves(&self) -> Vec<&Cf> {
        let mut out = Vec::new();
        self.collect(self.root, &mut out);
        out
    }

    fn collect<'a>(&'a self, node: usize, out: &mut Vec<&'a Cf>) {
        for e in &self.nodes[node].entries {
            match e.child {
                Some(c) => self.collect(c, out),
                None => out.push(&e.cf),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirchModel {
    pub centroids: Matrix,
    /// Number of leaf subclusters the global step started from.
    pub subclusters: usize,
}

impl BirchModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    /// Nearest final-cluster centroid.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.centroids.cols(), x.len())?;
        Ok(nearest(&self.centroids, x).0)
    }
}

pub fn fit_birch(x: &Matrix, cfg: &BirchConfig) -> Result<BirchModel> {
    let n = x.rows();
    if cfg.k == 0 || n < cfg.k {
        return Err(Error::data(format!("Birch needs at least k={} rows, got {n}", cfg.k)));
    }
    if cfg.branching_factor < 2 || cfg.threshold.is_nan() || cfg.threshold < 0.0 {
        return Err(Error::config("Birch needs branching factor >= 2 and a non-negative threshold"));
    }
    let mut tree = CfTree::new(cfg.threshold, cfg.branching_factor);
    for r in x.iter_rows() {
        tree.insert(r);
    }
    let leaves = tree.leaves();
    if leaves.len() < cfg.k {
        return Err(Error::data(format!(
            "Birch found {} leaf subclusters, fewer than k={}; try a smaller threshold than {}",
            leaves.len(),
            cfg.k,
            cfg.threshold
        )));
    }
    let cents: Vec<Vec<f64>> = leaves.iter().map(|cf| cf.centroid()).collect();
    let weights: Vec<f64> = leaves.iter().map(|cf| cf.n).collect();
    let points = Matrix::from_rows(&cents)?;
    let labels = cut(points.rows(), &ward_tree(&points, &weights), cfg.k);
    let centroids = group_centroids(&points, &weights, &labels, cfg.k);
    Ok(BirchModel { centroids, subclusters: leaves.len() })
}
