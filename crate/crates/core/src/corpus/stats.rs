use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::{Language, LabeledCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassStats {
    pub sentences: usize,
    pub unique_sentences: usize,
    pub words: usize,
    /// Words per sentence, truncated to two decimals.
    pub avg_words_per_sentence: f64,
}

impl ClassStats {
    fn finish(sentences: usize, unique_sentences: usize, words: usize) -> Self {
        Self {
            sentences,
            unique_sentences,
            words,
            avg_words_per_sentence: truncated_ratio(words, sentences),
        }
    }
}

/// `num / den` truncated to two decimals in exact integer arithmetic.
fn truncated_ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let cents = (num as u128 * 100) / den as u128;
    cents as f64 / 100.0
}

/// Column order follows the published summary: total, Irish, Scottish,
/// Welsh, English.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub total: ClassStats,
    pub irish: ClassStats,
    pub scottish: ClassStats,
    pub welsh: ClassStats,
    pub english: ClassStats,
}

impl StatsReport {
    pub fn class(&self, l: Language) -> &ClassStats {
        match l {
            Language::Irish => &self.irish,
            Language::Scottish => &self.scottish,
            Language::Welsh => &self.welsh,
            Language::English => &self.english,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialise")
    }

    pub fn to_table(&self) -> String {
        let cols = [
            ("Total", &self.total),
            ("Irish", &self.irish),
            ("Scottish", &self.scottish),
            ("Welsh", &self.welsh),
            ("English", &self.english),
        ];
        let rows: [(&str, Box<dyn Fn(&ClassStats) -> String>); 4] = [
            ("Sentences", Box::new(|c| group_thousands(c.sentences))),
            ("Unique sentences", Box::new(|c| group_thousands(c.unique_sentences))),
            ("Words", Box::new(|c| group_thousands(c.words))),
            ("Average words/sentence", Box::new(|c| format!("{:.2}", c.avg_words_per_sentence))),
        ];
        let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let cells: Vec<Vec<String>> =
            rows.iter().map(|(_, f)| cols.iter().map(|(_, c)| f(c)).collect()).collect();
        let col_w: Vec<usize> = (0..cols.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([cols[j].0.len()]).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        let _ = write!(out, "{:label_w$}", "");
        for (j, (name, _)) in cols.iter().enumerate() {
            let _ = write!(out, "  {:>w$}", name, w = col_w[j]);
        }
        out.push('\n');
        for (i, (label, _)) in rows.iter().enumerate() {
            let _ = write!(out, "{label:label_w$}");
            for (j, cell) in cells[i].iter().enumerate() {
                let _ = write!(out, "  {:>w$}", cell, w = col_w[j]);
            }
            out.push('\n');
        }
        out
    }
}

fn group_thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn corpus_stats(corpus: &LabeledCorpus) -> StatsReport {
    let mut sentences = [0usize; 4];
    let mut words = [0usize; 4];
    let mut unique: [HashSet<&str>; 4] = Default::default();
    let mut unique_all = HashSet::new();
    for s in corpus.samples() {
        let k = s.label.index();
        sentences[k] += 1;
        words[k] += s.text.split_whitespace().count();
        unique[k].insert(s.text.as_str());
        unique_all.insert(s.text.as_str());
    }
    let class = |l: Language| {
        let k = l.index();
        ClassStats::finish(sentences[k], unique[k].len(), words[k])
    };
    StatsReport {
        total: ClassStats::finish(sentences.iter().sum(), unique_all.len(), words.iter().sum()),
        irish: class(Language::Irish),
        scottish: class(Language::Scottish),
        welsh: class(Language::Welsh),
        english: class(Language::English),
    }
}
