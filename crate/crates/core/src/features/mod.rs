//! Deterministic feature extraction: character encodings, character n-gram
//! counts, text statistics, word n-gram tokens, min-max scaling and PCA.

mod alphabet;
mod ngram;
mod pca;
mod scaler;
mod text;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;

pub use alphabet::{encode_chars, Alphabet, DEFAULT_MAX_LEN, PAD_ID, UNK_ID};
pub use ngram::{
    fit_ngram_vocab, vectorize_ngrams, NgramVocab, SparseCounts, DEFAULT_MAX_FEATURES,
    DEFAULT_N_RANGE,
};
pub use pca::{fit_pca, pca_transform, PcaModel};
pub use scaler::MinMaxScaler;
pub use text::{is_consonant, is_vowel, text_stats, word_ngrams, TextStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub max_features: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { n_min: DEFAULT_N_RANGE.0, n_max: DEFAULT_N_RANGE.1, max_features: DEFAULT_MAX_FEATURES }
    }
}

/// Scaled statistical feature vector: n-gram counts, optionally followed by
/// `avg_word_len` and `avg_consonants`, each column min-max scaled with
/// parameters frozen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatFeaturizer {
    vocab: NgramVocab,
    with_stats: bool,
    scaler: MinMaxScaler,
}

impl StatFeaturizer {
    pub fn fit(texts: &[&str], cfg: &NgramConfig, with_stats: bool) -> Result<Self> {
        let vocab = NgramVocab::fit(texts.iter().copied(), (cfg.n_min, cfg.n_max), cfg.max_features)?;
        let raw = raw_matrix(&vocab, with_stats, texts)?;
        let scaler = MinMaxScaler::fit(&raw);
        Ok(Self { vocab, with_stats, scaler })
    }

    pub fn dim(&self) -> usize {
        self.vocab.len() + if self.with_stats { 2 } else { 0 }
    }

    pub fn vocab(&self) -> &NgramVocab {
        &self.vocab
    }

    pub fn with_stats(&self) -> bool {
        self.with_stats
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.vocab.ngrams().to_vec();
        if self.with_stats {
            names.push("avg_word_len".into());
            names.push("avg_consonants".into());
        }
        names
    }

    pub fn transform_one(&self, text: &str) -> Result<Vec<f64>> {
        let mut row = raw_row(&self.vocab, self.with_stats, text);
        self.scaler.transform_row(&mut row)?;
        Ok(row)
    }

    pub fn transform(&self, texts: &[&str]) -> Result<Matrix> {
        let raw = raw_matrix(&self.vocab, self.with_stats, texts)?;
        self.scaler.transform(&raw)
    }
}

fn raw_row(vocab: &NgramVocab, with_stats: bool, text: &str) -> Vec<f64> {
    let mut row = vocab.vectorize(text).to_dense();
    if with_stats {
        let st = text_stats(text);
        row.push(st.avg_word_len);
        row.push(st.avg_consonants);
    }
    row
}

fn raw_matrix(vocab: &NgramVocab, with_stats: bool, texts: &[&str]) -> Result<Matrix> {
    let cols = vocab.len() + if with_stats { 2 } else { 0 };
    let mut m = Matrix::zeros(texts.len(), cols);
    for (i, t) in texts.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&raw_row(vocab, with_stats, t));
    }
    Ok(m)
}

/// Encodes every text as a fixed-length id sequence.
pub fn encode_all(alphabet: &Alphabet, texts: &[&str], max_len: usize) -> Vec<Vec<u32>> {
    texts.iter().map(|t| alphabet.encode(t, max_len)).collect()
}

/// RFC 4180 field quoting; fields with commas, quotes, whitespace or line
/// breaks are quoted.
pub fn csv_field(s: &str) -> String {
    if s.is_empty() || s.chars().any(|c| matches!(c, ',' | '"' | '\n' | '\r' | ' ')) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes a header row and one row per sample, optionally with a trailing
/// label column.
pub fn write_matrix_csv<W: Write>(
    mut w: W,
    names: &[String],
    x: &Matrix,
    labels: Option<&[String]>,
) -> Result<()> {
    let mut header: Vec<String> = names.iter().map(|n| csv_field(n)).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, r) in x.iter_rows().enumerate() {
        let mut cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            cells.push(csv_field(&l[i]));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurizer_scales_into_unit_range_on_fit_rows() {
        let texts = ["tha an cat mor", "an cat", "mae y gath", "the cat is big"];
        let f = StatFeaturizer::fit(&texts, &NgramConfig { n_min: 1, n_max: 2, max_features: 40 }, true)
            .unwrap();
        assert_eq!(f.dim(), 42);
        let x = f.transform(&texts).unwrap();
        assert!(x.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(f.transform_one(texts[2]).unwrap(), x.row(2));
        let names = f.feature_names();
        assert_eq!(names[40], "avg_word_len");
        assert_eq!(names[41], "avg_consonants");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("ab"), "ab");
        assert_eq!(csv_field("a b"), "\"a b\"");
        assert_eq!(csv_field(" "), "\" \"");
        assert_eq!(csv_field("a\"b"), "\"a\"\"b\"");
        let x = Matrix::from_rows(&[vec![1.0, 0.5]]).unwrap();
        let mut out = Vec::new();
        write_matrix_csv(&mut out, &["a b".into(), "c".into()], &x, Some(&["ga".into()])).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "\"a b\",c,label\n1,0.5,ga\n");
    }
}
