//! Labelled sentence corpora: loading, cleaning, deduplication, splitting,
//! label subsampling, summary statistics and a synthetic fixture generator.

mod language;
mod preprocess;
mod stats;
mod synth;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

pub use language::{Language, NUM_CLASSES};
pub use preprocess::preprocess;
pub use stats::{corpus_stats, ClassStats, StatsReport};
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    pub text: String,
    pub label: Language,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabeledCorpus {
    samples: Vec<LabeledSample>,
    class_counts: [usize; NUM_CLASSES],
}

impl LabeledCorpus {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        let mut class_counts = [0; NUM_CLASSES];
        for s in &samples {
            class_counts[s.label.index()] += 1;
        }
        Self { samples, class_counts }
    }

    /// Builds a corpus from already-preprocessed `(label, text)` pairs.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Language, S)>,
        S: Into<String>,
    {
        let samples = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (label, text))| LabeledSample {
                text: text.into(),
                label,
                source_id: format!("mem:{}", i + 1),
            })
            .collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        self.class_counts
    }

    pub fn count(&self, label: Language) -> usize {
        self.class_counts[label.index()]
    }

    pub fn texts(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<Language> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn label_indices(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.index()).collect()
    }

    fn subset(&self, idx: &[usize]) -> LabeledCorpus {
        LabeledCorpus::new(idx.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// SHA-256 over labels and texts in order; used to prove a held-out set
    /// is untouched between splitting and evaluation.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.label.code().as_bytes());
            h.update([0x1f]);
            h.update(s.text.as_bytes());
            h.update([0x1e]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `code<TAB>text` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            writeln!(w, "{}\t{}", s.label.code(), s.text)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub dropped: usize,
    pub comments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Tsv,
}

/// Parses `label<TAB>text` records. Each text goes through [`preprocess`];
/// lines that become empty are dropped and counted.
pub fn read_corpus<R: BufRead>(reader: R, source: &str) -> Result<(LabeledCorpus, LoadReport)> {
    let mut samples = Vec::new();
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.starts_with('#') {
            report.comments += 1;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some((label, text)) = line.split_once('\t') else {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "expected 'label<TAB>text'".into(),
            });
        };
        let label: Language = label
            .trim()
            .parse()
            .map_err(|label| Error::UnknownLabel { label, line: lineno })?;
        let text = preprocess(text);
        if text.is_empty() {
            report.dropped += 1;
            continue;
        }
        samples.push(LabeledSample { text, label, source_id: format!("{source}:{lineno}") });
    }
    report.loaded = samples.len();
    Ok((LabeledCorpus::new(samples), report))
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<(LabeledCorpus, LoadReport)> {
    match format {
        CorpusFormat::Tsv => {
            let f = File::open(path)?;
            read_corpus(BufReader::new(f), &path.display().to_string())
        }
    }
}

/// Keeps the first occurrence of each exact text.
pub fn deduplicate(corpus: &LabeledCorpus) -> LabeledCorpus {
    let mut seen = HashSet::new();
    let samples = corpus
        .samples
        .iter()
        .filter(|s| seen.insert(s.text.as_str()))
        .cloned()
        .collect();
    LabeledCorpus::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: seed::DEFAULT_SEED, stratified: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelBudget {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for LabelBudget {
    fn default() -> Self {
        Self { fraction: 1.0, seed: seed::DEFAULT_SEED }
    }
}

/// `floor(fraction * n)` with a tolerance for products like `0.29 * 100`
/// that land a hair under an integer.
pub fn floor_share(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

fn shuffled_take(idx: &mut [usize], take: usize, rng: &mut seed::Rng) -> Vec<usize> {
    idx.shuffle(rng);
    idx[..take].to_vec()
}

fn per_class_indices(corpus: &LabeledCorpus) -> [Vec<usize>; NUM_CLASSES] {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, s) in corpus.samples.iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    by_class
}

/// Train/test split. Both halves keep the original corpus order.
pub fn split(corpus: &LabeledCorpus, spec: &SplitSpec) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    for l in Language::ALL {
        if corpus.count(l) == 1 {
            return Err(Error::data(format!(
                "class {} has fewer than 2 samples; cannot split",
                l.name()
            )));
        }
    }
    let mut rng = seed::rng(spec.seed);
    let mut in_train = vec![false; corpus.len()];
    if spec.stratified {
        for mut idx in per_class_indices(corpus) {
            let take = floor_share(spec.train_fraction, idx.len());
            for i in shuffled_take(&mut idx, take, &mut rng) {
                in_train[i] = true;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..corpus.len()).collect();
        let take = floor_share(spec.train_fraction, idx.len());
        for i in shuffled_take(&mut idx, take, &mut rng) {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| in_train[i]);
    Ok((corpus.subset(&train), corpus.subset(&test)))
}

/// Stratified label subsample: `floor(fraction * class size)` per class.
pub fn subsample_labels(train: &LabeledCorpus, budget: &LabelBudget) -> Result<LabeledCorpus> {
    if !(budget.fraction > 0.0 && budget.fraction <= 1.0) {
        return Err(Error::config(format!(
            "label budget fraction must lie in (0, 1], got {}",
            budget.fraction
        )));
    }
    if budget.fraction == 1.0 {
        return Ok(train.clone());
    }
    let mut rng = seed::rng(budget.seed);
    let mut keep = Vec::new();
    for mut idx in per_class_indices(train) {
        let take = floor_share(budget.fraction, idx.len());
        keep.extend(shuffled_take(&mut idx, take, &mut rng));
    }
    keep.sort_unstable();
    Ok(train.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn balanced(per_class: usize) -> LabeledCorpus {
        let mut pairs = Vec::new();
        for l in Language::ALL {
            for i in 0..per_class {
                pairs.push((l, format!("{} sample {}", l.name(), i)));
            }
        }
        LabeledCorpus::from_pairs(pairs)
    }

    #[test]
    fn load_counts_dropped_lines() {
        let data = "# header\nga\tDia dhuit!\ngd\tCiamar a tha thu?\ncy\tBore da\nen\t1234 !!\n";
        let (c, report) = read_corpus(Cursor::new(data), "t").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(report.dropped, 1);
        assert_eq!(report.comments, 1);
        assert_eq!(c.samples()[0].text, "dia dhuit");
        assert_eq!(c.samples()[0].source_id, "t:2");
    }

    #[test]
    fn unknown_label_names_token_and_line() {
        let err = read_corpus(Cursor::new("klingon\thello\n"), "t").unwrap_err();
        assert_eq!(err.to_string(), "unknown label 'klingon' at line 1");
    }

    #[test]
    fn missing_tab_is_malformed() {
        let err = read_corpus(Cursor::new("ga\tok\nga no tab here\n"), "t").unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let c = LabeledCorpus::from_pairs([
            (Language::Irish, "abc"),
            (Language::Scottish, "abc"),
            (Language::Welsh, "def"),
        ]);
        let d = deduplicate(&c);
        assert_eq!(d.texts(), vec!["abc", "def"]);
        assert_eq!(d.samples()[0].label, Language::Irish);
        let distinct = balanced(3);
        assert_eq!(deduplicate(&distinct), distinct);
    }

    #[test]
    fn stratified_split_sizes() {
        let c = balanced(100);
        let (train, test) = split(&c, &SplitSpec::default()).unwrap();
        for l in Language::ALL {
            assert_eq!(train.count(l), 80);
            assert_eq!(test.count(l), 20);
        }
        let (train2, test2) = split(&c, &SplitSpec::default()).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let c = LabeledCorpus::from_pairs([
            (Language::Irish, "a"),
            (Language::Irish, "b"),
            (Language::Welsh, "c"),
        ]);
        assert!(split(&c, &SplitSpec::default()).is_err());
        let bad = SplitSpec { train_fraction: 1.0, ..Default::default() };
        assert!(split(&balanced(5), &bad).is_err());
    }

    #[test]
    fn split_test_size_on_published_class_sizes() {
        // per-class floor of 0.8 on 2,689 / 2,582 / 3,098 / 1,600
        let sizes = [(Language::Irish, 2689), (Language::Scottish, 2582), (Language::Welsh, 3098), (Language::English, 1600)];
        let mut pairs = Vec::new();
        for (l, n) in sizes {
            for i in 0..n {
                pairs.push((l, format!("{i}")));
            }
        }
        let c = LabeledCorpus::from_pairs(pairs);
        let (train, test) = split(&c, &SplitSpec::default()).unwrap();
        assert_eq!(train.len() + test.len(), 9969);
        assert_eq!(test.len(), 538 + 517 + 620 + 320);
    }

    #[test]
    fn subsample_budget() {
        let c = balanced(100);
        let same = subsample_labels(&c, &LabelBudget { fraction: 1.0, seed: 1 }).unwrap();
        assert_eq!(same, c);
        let b = LabelBudget { fraction: 0.3, seed: 9 };
        let sub = subsample_labels(&c, &b).unwrap();
        for l in Language::ALL {
            assert_eq!(sub.count(l), 30);
        }
        assert_eq!(sub, subsample_labels(&c, &b).unwrap());
    }

    #[test]
    fn floor_share_handles_float_noise() {
        assert_eq!(floor_share(0.29, 100), 29);
        assert_eq!(floor_share(0.8, 2689), 2151);
    }

    proptest! {
        #[test]
        fn split_partitions_corpus(
            counts in proptest::array::uniform4(2usize..40),
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let mut pairs = Vec::new();
            for (l, n) in Language::ALL.iter().zip(counts) {
                for i in 0..n {
                    pairs.push((*l, format!("{} {}", l.code(), i)));
                }
            }
            let c = LabeledCorpus::from_pairs(pairs);
            let spec = SplitSpec { train_fraction: frac, seed, stratified: true };
            let (train, test) = split(&c, &spec).unwrap();
            let mut all: Vec<_> = train.samples().iter().chain(test.samples()).cloned().collect();
            let mut orig = c.samples().to_vec();
            all.sort_by(|a, b| a.source_id.cmp(&b.source_id));
            orig.sort_by(|a, b| a.source_id.cmp(&b.source_id));
            prop_assert_eq!(all, orig);
            for (l, n) in Language::ALL.iter().zip(counts) {
                prop_assert_eq!(train.count(*l), floor_share(frac, n));
            }
        }

        #[test]
        fn dedup_idempotent(texts in proptest::collection::vec("[ab]{1,3}", 0..30)) {
            let c = LabeledCorpus::from_pairs(texts.iter().map(|t| (Language::Irish, t.clone())));
            let once = deduplicate(&c);
            prop_assert_eq!(deduplicate(&once), once.clone());
            prop_assert!(once.count(Language::Irish) <= c.count(Language::Irish));
        }
    }
}
