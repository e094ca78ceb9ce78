//! Experiment orchestration: corpus, features, unsupervised models,
//! classifier and evaluation wired in a fixed order, plus grid execution and
//! model persistence.

mod config;
mod persist;
mod pipeline;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::ModelKind;
use crate::corpus::{self, generate_synthetic, load_corpus, CorpusFormat, LabeledCorpus};
use crate::error::{Error, ErrorKind, Result};
use crate::eval::{confusion_matrix_n, render_confusion, render_csv, render_table, EvalReport, ReportMeta};

pub use config::{CorpusSource, ExperimentConfig, ExperimentPlan, HyperParams, Seeds};
pub use persist::{load_artifact, read_artifact, save_artifact, write_artifact, Artifact, FORMAT_VERSION, MAGIC};
pub use pipeline::{Encoded, FeaturePipeline, TrainedPipeline, TrainingSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsupKind {
    Clusters,
    Vae,
    Lda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "chars")]
    Chars,
    #[serde(rename = "ngram")]
    Ngram,
    #[serde(rename = "ngram+stats")]
    NgramStats,
    #[serde(rename = "clusters")]
    Clusters,
    #[serde(rename = "vae")]
    Vae,
    #[serde(rename = "lda")]
    Lda,
    #[serde(rename = "clusters+ngram")]
    ClustersNgram,
    #[serde(rename = "vae+ngram")]
    VaeNgram,
    #[serde(rename = "lda+ngram")]
    LdaNgram,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 9] = [
        FeatureSet::Chars,
        FeatureSet::Ngram,
        FeatureSet::NgramStats,
        FeatureSet::Clusters,
        FeatureSet::Vae,
        FeatureSet::Lda,
        FeatureSet::ClustersNgram,
        FeatureSet::VaeNgram,
        FeatureSet::LdaNgram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Chars => "chars",
            FeatureSet::Ngram => "ngram",
            FeatureSet::NgramStats => "ngram+stats",
            FeatureSet::Clusters => "clusters",
            FeatureSet::Vae => "vae",
            FeatureSet::Lda => "lda",
            FeatureSet::ClustersNgram => "clusters+ngram",
            FeatureSet::VaeNgram => "vae+ngram",
            FeatureSet::LdaNgram => "lda+ngram",
        }
    }

    pub fn unsup(self) -> Option<UnsupKind> {
        match self {
            FeatureSet::Clusters | FeatureSet::ClustersNgram => Some(UnsupKind::Clusters),
            FeatureSet::Vae | FeatureSet::VaeNgram => Some(UnsupKind::Vae),
            FeatureSet::Lda | FeatureSet::LdaNgram => Some(UnsupKind::Lda),
            _ => None,
        }
    }

    /// Whether the n-gram count block is part of the output.
    pub fn uses_ngram(self) -> bool {
        matches!(
            self,
            FeatureSet::Ngram
                | FeatureSet::NgramStats
                | FeatureSet::ClustersNgram
                | FeatureSet::VaeNgram
                | FeatureSet::LdaNgram
        )
    }

    /// Character sequences feed only the sequence-capable models, and the CNN
    /// takes nothing else.
    pub fn check_model(self, model: ModelKind) -> Result<()> {
        match (self, model) {
            (FeatureSet::Chars, ModelKind::Svm) => Err(Error::config("chars features need nn or cnn")),
            (f, ModelKind::Cnn) if f != FeatureSet::Chars => {
                Err(Error::config(format!("cnn takes only chars features, not {f}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature set '{s}'")))
    }
}

pub fn load_source(source: &CorpusSource) -> Result<LabeledCorpus> {
    match source {
        CorpusSource::Path(p) => Ok(load_corpus(p, CorpusFormat::Tsv)?.0),
        CorpusSource::Synthetic(s) => Ok(generate_synthetic(s)),
    }
}

/// Outcome of one cell together with its protocol evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub report: EvalReport,
    /// Test-set content hash, taken right after the split and confirmed
    /// unchanged at evaluation.
    pub test_hash: String,
    pub train_rows: usize,
    pub labelled_rows: usize,
    pub test_rows: usize,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    Ok(run_experiment_on(config, &load_source(&config.corpus)?)?.report)
}

/// Runs one cell on an already loaded corpus.
///
/// Order: split, fit every feature extractor on the full unlabelled training
/// text, subsample labels, train on the subsample, evaluate on the test set.
pub fn run_experiment_on(config: &ExperimentConfig, corpus: &LabeledCorpus) -> Result<ExperimentRun> {
    config.validate()?;
    let (train, test) = corpus::split(corpus, &config.split_spec())?;
    let test_hash = test.content_hash();
    let labelled = corpus::subsample_labels(&train, &config.label_budget())?;
    let trained = TrainedPipeline::fit(
        &train.texts(),
        &labelled,
        config.model,
        config.features,
        &config.hyper,
        &config.seeds,
    )?;
    if test.content_hash() != test_hash {
        return Err(Error::data("test set changed between split and evaluation"));
    }
    let pred = trained.predict_indices(&test.texts())?;
    let cm = confusion_matrix_n(&test.label_indices(), &pred, corpus::NUM_CLASSES)?;
    let meta = ReportMeta {
        model: config.model.name().to_string(),
        features: config.features.name().to_string(),
        label_fraction: config.label_fraction,
        seed: config.seeds.master,
    };
    Ok(ExperimentRun {
        report: EvalReport::new(meta, cm)?,
        test_hash,
        train_rows: train.len(),
        labelled_rows: labelled.len(),
        test_rows: test.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub version: String,
    pub master_seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub kind: ErrorKind,
    pub message: String,
}

/// One grid cell: its report on success, the failure otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub features: FeatureSet,
    pub label_fraction: f64,
    pub confusion: bool,
    pub test_hash: Option<String>,
    pub report: Option<EvalReport>,
    pub failure: Option<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub fingerprint: Fingerprint,
    pub cells: Vec<CellResult>,
}

impl ReportBundle {
    pub fn reports(&self) -> Vec<&EvalReport> {
        self.cells.iter().filter_map(|c| c.report.as_ref()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellFailure> {
        self.cells.iter().filter_map(|c| c.failure.as_ref())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Comparison tables, then confusion panels for the cells that asked for
    /// them, then one line per failed cell.
    pub fn render_table(&self) -> String {
        let reports: Vec<EvalReport> = self.reports().into_iter().cloned().collect();
        let mut out = render_table(&reports);
        for c in &self.cells {
            if let (true, Some(r)) = (c.confusion, &c.report) {
                let _ = write!(out, "\nConfusion matrix: {} {}, label fraction {}\n", c.model, c.features, c.label_fraction);
                out.push_str(&render_confusion(r));
            }
        }
        for c in &self.cells {
            if let Some(f) = &c.failure {
                let _ = writeln!(out, "\nFAILED {} {} {}: {}", c.model, c.features, c.label_fraction, f.message);
            }
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let reports: Vec<EvalReport> = self.reports().into_iter().cloned().collect();
        render_csv(&reports)
    }
}

/// Worker count from `CLID_THREADS`, else rayon's default.
fn thread_cap() -> Option<usize> {
    std::env::var("CLID_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs every cell, in parallel, each from its own seeds. A failing cell is
/// recorded and the rest continue. Cell order in the bundle is plan order.
pub fn run_grid(plan: &ExperimentPlan) -> Result<ReportBundle> {
    for c in &plan.cells {
        c.validate()?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let mut sources: Vec<&CorpusSource> = Vec::new();
    for c in &plan.cells {
        if !sources.contains(&&c.corpus) {
            sources.push(&c.corpus);
        }
    }
    let corpora: Vec<Result<LabeledCorpus>> = sources.iter().map(|s| load_source(s)).collect();
    let cells = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|c| {
                let i = sources.iter().position(|s| *s == &c.corpus).expect("source listed");
                let outcome = match &corpora[i] {
                    Ok(corpus) => run_experiment_on(c, corpus),
                    Err(e) => Err(Error::data(e.to_string())),
                };
                let mut r = CellResult {
                    model: c.model,
                    features: c.features,
                    label_fraction: c.label_fraction,
                    confusion: c.confusion,
                    test_hash: None,
                    report: None,
                    failure: None,
                };
                match outcome {
                    Ok(run) => {
                        r.test_hash = Some(run.test_hash);
                        r.report = Some(run.report);
                    }
                    Err(e) => r.failure = Some(CellFailure { kind: e.kind(), message: e.to_string() }),
                }
                r
            })
            .collect()
    });
    Ok(ReportBundle {
        fingerprint: Fingerprint {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: plan.seeds.master,
            config_hash: plan.config_hash.clone(),
        },
        cells,
    })
}
