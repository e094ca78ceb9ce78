use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_RANGE: (usize, usize) = (1, 3);
pub const DEFAULT_MAX_FEATURES: usize = 3000;

/// Character n-gram vocabulary. Column order is frequency-descending with
/// lexicographic tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct NgramVocab {
    ngrams: Vec<String>,
    index: HashMap<String, usize>,
    n_range: (usize, usize),
    max_features: usize,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabRepr {
    ngrams: Vec<String>,
    n_range: (usize, usize),
    max_features: usize,
}

impl From<VocabRepr> for NgramVocab {
    fn from(r: VocabRepr) -> Self {
        NgramVocab::from_ngrams(r.ngrams, r.n_range, r.max_features)
    }
}

impl From<NgramVocab> for VocabRepr {
    fn from(v: NgramVocab) -> Self {
        VocabRepr { ngrams: v.ngrams, n_range: v.n_range, max_features: v.max_features }
    }
}

/// Sparse count vector; entries sorted by column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCounts {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseCounts {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(j, c) in &self.entries {
            v[j] = c;
        }
        v
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

/// Visits every character n-gram of order `lo..=hi` in `text`.
fn for_each_ngram(text: &str, (lo, hi): (usize, usize), mut f: impl FnMut(&str)) {
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let nchars = bounds.len() - 1;
    for n in lo..=hi {
        if n == 0 || n > nchars {
            continue;
        }
        for start in 0..=nchars - n {
            f(&text[bounds[start]..bounds[start + n]]);
        }
    }
}

impl NgramVocab {
    pub fn fit<'a, I>(texts: I, n_range: (usize, usize), max_features: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if n_range.0 == 0 || n_range.0 > n_range.1 {
            return Err(Error::config(format!("invalid n-gram range {n_range:?}")));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut docs = 0usize;
        for t in texts {
            docs += 1;
            for_each_ngram(t, n_range, |g| match counts.get_mut(g) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(g.to_string(), 1);
                }
            });
        }
        if docs == 0 {
            return Err(Error::data("cannot fit an n-gram vocabulary on an empty corpus"));
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_features);
        let ngrams: Vec<String> = ranked.into_iter().map(|(g, _)| g).collect();
        Ok(Self::from_ngrams(ngrams, n_range, max_features))
    }

    fn from_ngrams(ngrams: Vec<String>, n_range: (usize, usize), max_features: usize) -> Self {
        let index = ngrams.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Self { ngrams, index, n_range, max_features }
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn column(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }

    pub fn n_range(&self) -> (usize, usize) {
        self.n_range
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    /// Raw in-vocabulary counts; unseen n-grams are ignored.
    pub fn vectorize(&self, text: &str) -> SparseCounts {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for_each_ngram(text, self.n_range, |g| {
            if let Some(&j) = self.index.get(g) {
                *acc.entry(j).or_default() += 1.0;
            }
        });
        let mut entries: Vec<(usize, f64)> = acc.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        SparseCounts { dim: self.len(), entries }
    }
}

pub fn fit_ngram_vocab<'a, I>(texts: I, n_range: (usize, usize), max_features: usize) -> Result<NgramVocab>
where
    I: IntoIterator<Item = &'a str>,
{
    NgramVocab::fit(texts, n_range, max_features)
}

pub fn vectorize_ngrams(text: &str, vocab: &NgramVocab) -> SparseCounts {
    vocab.vectorize(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_examples() {
        let v = NgramVocab::fit(["aba"], (2, 2), 10).unwrap();
        assert_eq!(v.ngrams(), &["ab".to_string(), "ba".to_string()]);
        let v = NgramVocab::fit(["ab", "ab", "cd"], (2, 2), 2).unwrap();
        assert_eq!(v.ngrams(), &["ab".to_string(), "cd".to_string()]);
        assert!(NgramVocab::fit(std::iter::empty::<&str>(), (1, 3), 10).is_err());
    }

    #[test]
    fn vectorize_examples() {
        let v = NgramVocab::fit(["aba"], (2, 2), 10).unwrap();
        assert_eq!(v.vectorize("aba").to_dense(), vec![1.0, 1.0]);
        assert_eq!(v.vectorize("").to_dense(), vec![0.0, 0.0]);
        assert_eq!(v.vectorize("abab").to_dense(), vec![2.0, 1.0]);
    }

    #[test]
    fn spaces_and_multibyte_chars_count() {
        let v = NgramVocab::fit(["tá sé"], (1, 2), 100).unwrap();
        assert!(v.column(" ").is_some());
        assert!(v.column("á ").is_some());
        assert!(v.column("é").is_some());
        // 5 unigrams + 4 bigrams
        assert_eq!(v.vectorize("tá sé").total(), 9.0);
    }

    proptest! {
        #[test]
        fn order_invariant(texts in proptest::collection::vec("[abc ]{0,8}", 1..12)) {
            let a = NgramVocab::fit(texts.iter().map(String::as_str), (1, 3), 7).unwrap();
            let rev = NgramVocab::fit(texts.iter().rev().map(String::as_str), (1, 3), 7).unwrap();
            prop_assert_eq!(a.ngrams(), rev.ngrams());
            prop_assert!(a.len() <= 7);
            for g in a.ngrams() {
                let n = g.chars().count();
                prop_assert!((1..=3).contains(&n));
            }
        }

        #[test]
        fn column_sum_counts_in_vocab_occurrences(text in "[abcd ]{0,20}") {
            let v = NgramVocab::fit(["abc dab", "cc a"], (1, 2), 6).unwrap();
            let mut expected = 0usize;
            let chars: Vec<char> = text.chars().collect();
            for n in 1..=2 {
                for w in chars.windows(n) {
                    let g: String = w.iter().collect();
                    if v.column(&g).is_some() {
                        expected += 1;
                    }
                }
            }
            prop_assert_eq!(v.vectorize(&text).total(), expected as f64);
        }
    }
}
