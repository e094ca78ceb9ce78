use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const NUM_TOPICS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Final counts are averaged over this many trailing sweeps.
    pub sample_window: usize,
    pub min_term_freq: usize,
    pub infer_sweeps: usize,
    pub infer_window: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: NUM_TOPICS,
            alpha: 0.1,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            sample_window: 100,
            min_term_freq: 2,
            infer_sweeps: 100,
            infer_window: 50,
            seed: seed::DEFAULT_SEED,
        }
    }
}

impl LdaConfig {
    fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(Error::config("LDA needs at least one topic"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::config("LDA priors must be positive"));
        }
        if self.iterations == 0 || self.sample_window == 0 || self.sample_window > self.iterations {
            return Err(Error::config("LDA sample window must lie within 1..=iterations"));
        }
        if self.burn_in > self.iterations - self.sample_window {
            return Err(Error::config("LDA burn-in overlaps the sample window"));
        }
        if self.infer_sweeps == 0 || self.infer_window == 0 || self.infer_window > self.infer_sweeps {
            return Err(Error::config("LDA inference window must lie within 1..=infer_sweeps"));
        }
        Ok(())
    }
}

/// Topic model with averaged topic-word counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    /// Vocabulary terms in index order (lexicographic).
    pub terms: Vec<String>,
    /// `topics x V`, row-major, averaged over the sample window.
    pub topic_word: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Collapsed Gibbs state over integer-coded documents.
pub struct GibbsSampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    rng: seed::Rng,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(docs: Vec<Vec<usize>>, k: usize, v: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut doc_topic = vec![vec![0u32; k]; docs.len()];
        let mut topic_word = vec![0u32; k * v];
        let mut topic_total = vec![0u32; k];
        let z: Vec<Vec<usize>> = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        doc_topic[d][t] += 1;
                        topic_word[t * v + w] += 1;
                        topic_total[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Self { k, v, alpha, beta, docs, z, doc_topic, topic_word, topic_total, rng, weights: vec![0.0; k] }
    }

    pub fn sweep(&mut self) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[d][t] as f64 + self.alpha)
                        * (self.topic_word[t * v + w] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);
                self.z[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// True when the count tables agree with the assignments.
    pub fn counts_consistent(&self) -> bool {
        let words: u64 = self.topic_word.iter().map(|&c| c as u64).sum();
        let totals: u64 = self.topic_total.iter().map(|&c| c as u64).sum();
        let per_doc = self
            .doc_topic
            .iter()
            .zip(&self.docs)
            .all(|(dt, doc)| dt.iter().map(|&c| c as usize).sum::<usize>() == doc.len());
        words as usize == self.token_count() && totals as usize == self.token_count() && per_doc
    }
}

fn build_vocab(docs: &[Vec<String>], min_freq: usize) -> Vec<String> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in d {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    freq.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).map(|(t, _)| t.to_string()).collect()
}

impl LdaModel {
    fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub(crate) fn prepare(&mut self) {
        if self.index.len() != self.terms.len() {
            self.rebuild_index();
        }
    }

    pub fn topics(&self) -> usize {
        self.config.topics
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    fn term_id(&self, t: &str) -> Option<usize> {
        if self.index.len() == self.terms.len() {
            self.index.get(t).copied()
        } else {
            self.terms.binary_search_by(|x| x.as_str().cmp(t)).ok()
        }
    }

    /// Normalised word distribution of one topic.
    pub fn topic_distribution(&self, topic: usize) -> Vec<f64> {
        let v = self.terms.len();
        let row = &self.topic_word[topic * v..(topic + 1) * v];
        let denom: f64 = row.iter().sum::<f64>() + v as f64 * self.config.beta;
        row.iter().map(|c| (c + self.config.beta) / denom).collect()
    }

    /// Topic proportions by fold-in Gibbs sampling with frozen topic-word
    /// counts. Unknown tokens are skipped; an empty result is uniform.
    pub fn infer(&self, doc: &[String]) -> Vec<f64> {
        let cfg = &self.config;
        let k = cfg.topics;
        let ids: Vec<usize> = doc.iter().filter_map(|t| self.term_id(t)).collect();
        if ids.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let phi: Vec<Vec<f64>> = (0..k).map(|t| self.topic_distribution(t)).collect();
        let mut rng = seed::rng(seed::derive(cfg.seed, "lda-infer"));
        let mut z: Vec<usize> = ids.iter().map(|_| rng.random_range(0..k)).collect();
        let mut counts = vec![0u32; k];
        z.iter().for_each(|&t| counts[t] += 1);
        let mut acc = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let denom = ids.len() as f64 + k as f64 * cfg.alpha;
        for sweep in 0..cfg.infer_sweeps {
            for (i, &w) in ids.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (counts[t] as f64 + cfg.alpha) * phi[t][w];
                    weights[t] = total;
                }
                let u = rng.random::<f64>() * total;
                z[i] = weights.iter().position(|&c| u < c).unwrap_or(k - 1);
                counts[z[i]] += 1;
            }
            if sweep >= cfg.infer_sweeps - cfg.infer_window {
                for t in 0..k {
                    acc[t] += (counts[t] as f64 + cfg.alpha) / denom;
                }
            }
        }
        let s: f64 = acc.iter().sum();
        acc.into_iter().map(|a| a / s).collect()
    }

    /// `n` most probable terms of a topic, ties broken lexicographically.
    pub fn top_terms(&self, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
        if topic >= self.topics() {
            return Err(Error::config(format!("topic {topic} out of range 0..{}", self.topics())));
        }
        let dist = self.topic_distribution(topic);
        let mut order: Vec<usize> = (0..dist.len()).collect();
        // terms are stored sorted, so index order is lexicographic order
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        Ok(order.into_iter().take(n).map(|i| (self.terms[i].clone(), dist[i])).collect())
    }
}

/// Collapsed Gibbs LDA over token lists.
pub fn fit_lda(docs: &[Vec<String>], config: &LdaConfig) -> Result<LdaModel> {
    fit_lda_traced(docs, config, |_| {})
}

/// As [`fit_lda`], calling `observe` after every sweep.
pub fn fit_lda_traced(
    docs: &[Vec<String>],
    config: &LdaConfig,
    mut observe: impl FnMut(&GibbsSampler),
) -> Result<LdaModel> {
    config.validate()?;
    if docs.len() < config.topics {
        return Err(Error::data(format!(
            "LDA needs at least {} documents, got {}",
            config.topics,
            docs.len()
        )));
    }
    let terms = build_vocab(docs, config.min_term_freq);
    if terms.is_empty() {
        return Err(Error::data(format!(
            "LDA vocabulary is empty after dropping terms seen fewer than {} times",
            config.min_term_freq
        )));
    }
    let index: HashMap<String, usize> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let coded: Vec<Vec<usize>> =
        docs.iter().map(|d| d.iter().filter_map(|t| index.get(t).copied()).collect()).collect();
    let (k, v) = (config.topics, terms.len());
    let mut sampler = GibbsSampler::new(coded, k, v, config.alpha, config.beta, config.seed);
    let mut acc = vec![0.0; k * v];
    let window_start = config.iterations - config.sample_window;
    for it in 0..config.iterations {
        sampler.sweep();
        observe(&sampler);
        if it >= window_start {
            acc.iter_mut().zip(&sampler.topic_word).for_each(|(a, &c)| *a += c as f64);
        }
    }
    let w = config.sample_window as f64;
    acc.iter_mut().for_each(|a| *a /= w);
    Ok(LdaModel { config: *config, terms, topic_word: acc, index })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> LdaConfig {
        LdaConfig { iterations: 200, burn_in: 100, sample_window: 50, ..Default::default() }
    }

    /// Four groups of documents over disjoint vocabularies.
    fn disjoint_corpus() -> Vec<Vec<String>> {
        let groups = [
            ["agus", "an", "ar", "bhi", "se"],
            ["the", "and", "of", "was", "it"],
            ["mae", "yn", "y", "ac", "roedd"],
            ["tha", "air", "gu", "na", "bha"],
        ];
        let mut rng = seed::rng(3);
        (0..80)
            .map(|i| {
                let g = &groups[i % 4];
                (0..12).map(|_| g[rng.random_range(0..5)].to_string()).collect()
            })
            .collect()
    }

    #[test]
    fn disjoint_groups_get_distinct_topics() {
        let docs = disjoint_corpus();
        let m = fit_lda(&docs, &quick()).unwrap();
        let mut dominant = [usize::MAX; 4];
        for (i, d) in docs.iter().enumerate() {
            let p = m.infer(d);
            let (t, &best) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            assert!(best > 0.6, "doc {i}: {p:?}");
            let g = i % 4;
            assert!(dominant[g] == usize::MAX || dominant[g] == t);
            dominant[g] = t;
        }
        let distinct: std::collections::BTreeSet<_> = dominant.iter().collect();
        assert_eq!(distinct.len(), 4);
        for (g, &t) in dominant.iter().enumerate() {
            let top = m.top_terms(t, 5).unwrap();
            assert!(top.iter().all(|(w, _)| docs[g].contains(w) || docs[g + 4].contains(w)));
        }
    }

    #[test]
    fn counts_stay_consistent_every_sweep() {
        let docs = disjoint_corpus();
        let mut sweeps = 0;
        fit_lda_traced(&docs, &quick(), |s| {
            assert!(s.counts_consistent());
            assert_eq!(s.topic_word.iter().map(|&c| c as usize).sum::<usize>(), 80 * 12);
            sweeps += 1;
        })
        .unwrap();
        assert_eq!(sweeps, 200);
    }

    #[test]
    fn distributions_and_inference_are_simplices() {
        let docs = disjoint_corpus();
        let m = fit_lda(&docs, &quick()).unwrap();
        for t in 0..4 {
            assert!((m.topic_distribution(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let mixed: Vec<String> = ["agus", "the", "mae", "tha", "zzz"].iter().map(|s| s.to_string()).collect();
        let p = m.infer(&mixed);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9 && p.iter().all(|&v| v >= 0.0));
        assert_eq!(p, m.infer(&mixed));
        assert_eq!(m.infer(&["qqq".to_string()]), vec![0.25; 4]);
        assert_eq!(m.infer(&[]), vec![0.25; 4]);
    }

    #[test]
    fn top_terms_clamps_and_orders() {
        let m = fit_lda(&disjoint_corpus(), &quick()).unwrap();
        assert!(m.top_terms(0, 0).unwrap().is_empty());
        assert_eq!(m.top_terms(1, 500).unwrap().len(), m.vocab_size());
        let t = m.top_terms(2, 20).unwrap();
        assert!(t.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        assert!(m.top_terms(4, 1).is_err());
    }

    #[test]
    fn vocabulary_pruning_and_errors() {
        let docs: Vec<Vec<String>> = (0..4).map(|i| vec![format!("w{i}")]).collect();
        assert!(fit_lda(&docs, &quick()).is_err());
        assert!(fit_lda(&docs[..2], &quick()).is_err());
        let docs2: Vec<Vec<String>> = (0..4).map(|i| vec!["x".into(), format!("w{i}")]).collect();
        let m = fit_lda(&docs2, &quick()).unwrap();
        assert_eq!(m.terms, vec!["x".to_string()]);
    }

    #[test]
    fn serde_round_trip_keeps_inference() {
        let docs = disjoint_corpus();
        let m = fit_lda(&docs, &quick()).unwrap();
        let mut back: LdaModel = bincode::deserialize(&bincode::serialize(&m).unwrap()).unwrap();
        assert_eq!(back.infer(&docs[0]), m.infer(&docs[0]));
        back.prepare();
        assert_eq!(back.infer(&docs[1]), m.infer(&docs[1]));
    }
}
