use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::corpus::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::nn::{softmax, train_loop, Dense, Differentiable, OptimizerKind, TrainConfig};
use crate::seed;

pub const EMBED_DIM: usize = 32;
pub const FILTERS: usize = 64;
pub const WIDTHS: [usize; 3] = [2, 3, 4];
pub const POOLED_DIM: usize = FILTERS * WIDTHS.len();

pub fn default_cnn_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        epochs: 40,
        batch_size: 64,
        seed: seed::DEFAULT_SEED,
        optimizer: OptimizerKind::Adam,
        halve_on_increase: true,
    }
}

/// Offsets of one convolution bank: `filters[f][o][e]` then `bias[f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Conv {
    width: usize,
    off: usize,
}

impl Conv {
    fn len(&self) -> usize {
        FILTERS * self.width * EMBED_DIM + FILTERS
    }

    fn w(&self, f: usize, o: usize) -> usize {
        self.off + (f * self.width + o) * EMBED_DIM
    }

    fn b(&self, f: usize) -> usize {
        self.off + FILTERS * self.width * EMBED_DIM + f
    }
}

/// Character CNN: embedding, parallel valid convolutions with ReLU, global
/// max pooling, softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    vocab: usize,
    seq_len: usize,
    convs: [Conv; 3],
    head: Dense,
    params: Vec<f64>,
    pub config: TrainConfig,
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CnnBatch {
    pub seqs: Vec<Vec<u32>>,
    pub y: Vec<usize>,
}

/// `table[o][id][f]`: contribution of character `id` at filter offset `o`.
type Table = Vec<f64>;

struct Pooled {
    value: Vec<f64>,
    /// Winning start position per pooled unit.
    argmax: Vec<usize>,
}

impl CnnModel {
    pub fn new(vocab: usize, seq_len: usize, config: TrainConfig) -> Self {
        let mut at = vocab * EMBED_DIM;
        let convs = WIDTHS.map(|width| {
            let c = Conv { width, off: at };
            at += c.len();
            c
        });
        let head = Dense::alloc(&mut at, POOLED_DIM, NUM_CLASSES);
        let mut params = vec![0.0; at];
        let mut rng = seed::rng(seed::derive(config.seed, "cnn-init"));
        for v in &mut params[..vocab * EMBED_DIM] {
            *v = rng.random_range(-0.5..0.5);
        }
        for c in &convs {
            let lim = (6.0 / ((c.width * EMBED_DIM) + FILTERS) as f64).sqrt();
            for v in &mut params[c.off..c.b(0)] {
                *v = rng.random_range(-lim..lim);
            }
        }
        head.init(&mut params, &mut rng);
        Self { vocab, seq_len, convs, head, params, config, loss_trace: Vec::new() }
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn embedding(&self, id: usize) -> &[f64] {
        &self.params[id * EMBED_DIM..(id + 1) * EMBED_DIM]
    }

    fn tables(&self) -> Vec<Table> {
        self.convs
            .iter()
            .map(|c| {
                let mut t = vec![0.0; c.width * self.vocab * FILTERS];
                for o in 0..c.width {
                    for id in 0..self.vocab {
                        let e = self.embedding(id);
                        let row = &mut t[(o * self.vocab + id) * FILTERS..(o * self.vocab + id + 1) * FILTERS];
                        for (f, cell) in row.iter_mut().enumerate() {
                            let w = &self.params[c.w(f, o)..c.w(f, o) + EMBED_DIM];
                            *cell = w.iter().zip(e).map(|(a, b)| a * b).sum();
                        }
                    }
                }
                t
            })
            .collect()
    }

    fn pool(&self, tables: &[Table], ids: &[usize]) -> Pooled {
        let mut value = vec![0.0; POOLED_DIM];
        let mut argmax = vec![0; POOLED_DIM];
        let mut acc = vec![0.0; FILTERS];
        for (ci, c) in self.convs.iter().enumerate() {
            let t = &tables[ci];
            let mut best = vec![f64::NEG_INFINITY; FILTERS];
            let mut at = vec![0; FILTERS];
            for start in 0..=ids.len().saturating_sub(c.width) {
                for (f, a) in acc.iter_mut().enumerate() {
                    *a = self.params[c.b(f)];
                }
                for o in 0..c.width {
                    let row = &t[(o * self.vocab + ids[start + o]) * FILTERS..][..FILTERS];
                    acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                for f in 0..FILTERS {
                    // strict comparison keeps the earliest position on ties
                    if acc[f] > best[f] {
                        best[f] = acc[f];
                        at[f] = start;
                    }
                }
            }
            for f in 0..FILTERS {
                value[ci * FILTERS + f] = best[f].max(0.0);
                argmax[ci * FILTERS + f] = at[f];
            }
        }
        Pooled { value, argmax }
    }

    fn check_ids(&self, seq: &[u32]) -> Result<Vec<usize>> {
        if seq.len() != self.seq_len {
            return Err(Error::DimensionMismatch { expected: self.seq_len, got: seq.len() });
        }
        seq.iter()
            .map(|&i| {
                let i = i as usize;
                if i < self.vocab {
                    Ok(i)
                } else {
                    Err(Error::data(format!("character id {i} outside vocabulary of {}", self.vocab)))
                }
            })
            .collect()
    }

    /// Pooled 192-dim representation.
    pub fn pooled(&self, seq: &[u32]) -> Result<Vec<f64>> {
        let ids = self.check_ids(seq)?;
        Ok(self.pool(&self.tables(), &ids).value)
    }

    pub fn predict_proba(&self, seq: &[u32]) -> Result<Vec<f64>> {
        Ok(self.predict_proba_all(std::slice::from_ref(&seq.to_vec()))?.remove(0))
    }

    /// Batch inference sharing one set of lookup tables.
    pub fn predict_proba_all(&self, seqs: &[Vec<u32>]) -> Result<Vec<Vec<f64>>> {
        let tables = self.tables();
        seqs.iter()
            .map(|s| {
                let ids = self.check_ids(s)?;
                let pooled = self.pool(&tables, &ids);
                let mut z = vec![0.0; NUM_CLASSES];
                self.head.forward(&self.params, &pooled.value, &mut z);
                Ok(softmax(&z))
            })
            .collect()
    }

    fn evaluate(&self, b: &CnnBatch, want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let tables = self.tables();
        let p = &self.params;
        let mut g = if want_grad { vec![0.0; p.len()] } else { Vec::new() };
        let inv = 1.0 / b.seqs.len() as f64;
        let mut loss = 0.0;
        for (seq, &y) in b.seqs.iter().zip(&b.y) {
            let ids = self.check_ids(seq)?;
            let pooled = self.pool(&tables, &ids);
            let mut z = vec![0.0; NUM_CLASSES];
            self.head.forward(p, &pooled.value, &mut z);
            let probs = softmax(&z);
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            if !want_grad {
                continue;
            }
            let mut dz = probs;
            dz[y] -= 1.0;
            dz.iter_mut().for_each(|v| *v *= inv);
            let mut dpool = vec![0.0; POOLED_DIM];
            self.head.backward(p, &pooled.value, &dz, &mut g, Some(&mut dpool));
            for (ci, c) in self.convs.iter().enumerate() {
                for f in 0..FILTERS {
                    let u = ci * FILTERS + f;
                    if pooled.value[u] <= 0.0 {
                        continue;
                    }
                    let d = dpool[u];
                    g[c.b(f)] += d;
                    let start = pooled.argmax[u];
                    for o in 0..c.width {
                        let id = ids[start + o];
                        let (wo, eo) = (c.w(f, o), id * EMBED_DIM);
                        for e in 0..EMBED_DIM {
                            g[wo + e] += d * p[eo + e];
                            g[eo + e] += d * p[wo + e];
                        }
                    }
                }
            }
        }
        Ok((loss * inv, g))
    }
}

impl Differentiable for CnnModel {
    type Batch = CnnBatch;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss(&self, b: &CnnBatch) -> f64 {
        self.evaluate(b, false).map(|r| r.0).unwrap_or(f64::NAN)
    }

    fn loss_and_grad(&self, b: &CnnBatch) -> (f64, Vec<f64>) {
        self.evaluate(b, true).unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; self.params.len()]))
    }
}

/// Trains on fixed-length id sequences; `vocab` is the alphabet size
/// including the pad and unknown ids.
pub fn train_cnn(seqs: &[Vec<u32>], y: &[usize], vocab: usize, cfg: &TrainConfig) -> Result<CnnModel> {
    check_training_set(seqs.len(), y)?;
    cfg.validate()?;
    let len = seqs[0].len();
    let longest = WIDTHS.iter().max().copied().unwrap_or(1);
    if len < longest {
        return Err(Error::data(format!("sequences of length {len} are shorter than the widest filter")));
    }
    let mut model = CnnModel::new(vocab, len, *cfg);
    for s in seqs {
        model.check_ids(s)?;
    }
    let mut params = std::mem::take(&mut model.params);
    let trace = train_loop(seqs.len(), cfg, &mut params, |rows, p, _| {
        let batch = CnnBatch {
            seqs: rows.iter().map(|&r| seqs[r].clone()).collect(),
            y: rows.iter().map(|&r| y[r]).collect(),
        };
        model.params = p.to_vec();
        model.evaluate(&batch, true)
    })
    .map_err(|e| match e {
        Error::Numerical(m) => Error::numerical(format!("CNN training: {m}")),
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

    fn seqs(n: usize, seed: u64) -> Vec<Vec<u32>> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|i| {
                let len = 10 + 7 * (i % 5);
                (0..40).map(|t| if t < len { rng.random_range(2..20) } else { 0 }).collect()
            })
            .collect()
    }

    #[test]
    fn pooled_dimension_is_192() {
        let m = CnnModel::new(20, 40, default_cnn_config());
        assert_eq!(POOLED_DIM, 192);
        assert_eq!(m.pooled(&seqs(1, 0)[0]).unwrap().len(), 192);
    }

    #[test]
    fn all_pad_input_is_a_distribution() {
        let m = CnnModel::new(20, 40, default_cnn_config());
        let p = m.predict_proba(&[0; 40]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.predict_proba(&[0; 39]).is_err());
        assert!(m.predict_proba(&[25; 40]).is_err());
    }

    #[test]
    fn gradient_check_two_samples() {
        let mut m = CnnModel::new(20, 40, default_cnn_config());
        let b = CnnBatch { seqs: seqs(2, 1), y: vec![1, 3] };
        let err = gradient_check(&mut m, &b, 5);
        assert!(err <= 1e-4, "{err}");
    }

    /// Direct convolution without lookup tables.
    #[test]
    fn tables_match_direct_convolution() {
        let m = CnnModel::new(20, 40, default_cnn_config());
        let s = &seqs(1, 2)[0];
        let pooled = m.pooled(s).unwrap();
        for (ci, c) in m.convs.iter().enumerate() {
            for f in [0, 17, 63] {
                let mut best = f64::NEG_INFINITY;
                for start in 0..=40 - c.width {
                    let mut a = m.params[c.b(f)];
                    for o in 0..c.width {
                        let e = m.embedding(s[start + o] as usize);
                        a += (0..EMBED_DIM).map(|k| m.params[c.w(f, o) + k] * e[k]).sum::<f64>();
                    }
                    best = best.max(a);
                }
                assert!((pooled[ci * FILTERS + f] - best.max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overfits_small_set() {
        let s = seqs(50, 3);
        let y: Vec<usize> = (0..50).map(|i| (i * 7 + 1) % 4).collect();
        let cfg = TrainConfig { epochs: 150, batch_size: 10, optimizer: OptimizerKind::Adam, ..default_cnn_config() };
        let m = train_cnn(&s, &y, 20, &cfg).unwrap();
        let probs = m.predict_proba_all(&s).unwrap();
        let hits = probs.iter().zip(&y).filter(|(p, &l)| argmax(p) == l).count();
        assert!(hits >= 50, "{hits}/50");
    }
}
