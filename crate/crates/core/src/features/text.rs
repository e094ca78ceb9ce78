use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextStats {
    pub avg_word_len: f64,
    pub avg_consonants: f64,
}

/// A letter is a vowel when its base letter, diacritics stripped, is one of
/// a e i o u w y (w and y are vowels in Welsh).
pub fn is_vowel(c: char) -> bool {
    let base = c.nfd().next().unwrap_or(c);
    matches!(base.to_lowercase().next().unwrap_or(base), 'a' | 'e' | 'i' | 'o' | 'u' | 'w' | 'y')
}

pub fn is_consonant(c: char) -> bool {
    c.is_alphabetic() && !is_vowel(c)
}

pub fn text_stats(text: &str) -> TextStats {
    let mut words = 0usize;
    let mut chars = 0usize;
    let mut consonants = 0usize;
    for w in text.split_whitespace() {
        words += 1;
        for c in w.chars() {
            chars += 1;
            consonants += usize::from(is_consonant(c));
        }
    }
    if words == 0 {
        return TextStats::default();
    }
    TextStats {
        avg_word_len: chars as f64 / words as f64,
        avg_consonants: consonants as f64 / words as f64,
    }
}

/// Whitespace unigrams followed by adjacent bigrams joined with `_`.
pub fn word_ngrams(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    out.extend(words.windows(2).map(|p| format!("{}_{}", p[0], p[1])));
    out
}
