//! Supervised classifiers: one-vs-rest linear SVM, dense network and
//! character CNN. All training is single-threaded and seed-deterministic.

mod cnn;
mod mlp;
mod svm;

use serde::{Deserialize, Serialize};

use crate::corpus::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};

pub use crate::nn::{gradient_check, Differentiable, OptimizerKind, TrainConfig};
pub use cnn::{default_cnn_config, train_cnn, CnnBatch, CnnModel, EMBED_DIM, FILTERS, POOLED_DIM, WIDTHS};
pub use mlp::{default_nn_config, train_nn, NnBatch, NnModel, DROPOUT};
pub use svm::{hinge, train_svm, SvmConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Nn,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Svm, ModelKind::Nn, ModelKind::Cnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Nn => "nn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model '{s}' (expected svm, nn or cnn)")))
    }
}

/// Rejects empty or single-class training sets and out-of-range labels.
pub(crate) fn check_training_set(rows: usize, y: &[usize]) -> Result<()> {
    if rows != y.len() {
        return Err(Error::DimensionMismatch { expected: rows, got: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::data(format!("label index {bad} out of range")));
    }
    let first = y.first().ok_or_else(|| Error::data("empty training set"))?;
    if y.iter().all(|l| l == first) {
        return Err(Error::data("training labels contain a single class"));
    }
    Ok(())
}

/// Classifier input: dense feature rows or character id sequences.
#[derive(Debug, Clone, Copy)]
pub enum Inputs<'a> {
    Dense(&'a Matrix),
    Sequences(&'a [Vec<u32>]),
}

impl Inputs<'_> {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Dense(m) => m.rows(),
            Inputs::Sequences(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Svm(SvmModel),
    Nn(NnModel),
    Cnn(CnnModel),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Svm(_) => ModelKind::Svm,
            Classifier::Nn(_) => ModelKind::Nn,
            Classifier::Cnn(_) => ModelKind::Cnn,
        }
    }

    /// One score vector per input: SVM margins or class probabilities.
    pub fn scores(&self, inputs: Inputs<'_>) -> Result<Vec<Vec<f64>>> {
        match (self, inputs) {
            (Classifier::Svm(m), Inputs::Dense(x)) => x.iter_rows().map(|r| m.scores(r)).collect(),
            (Classifier::Nn(m), Inputs::Dense(x)) => x.iter_rows().map(|r| m.predict_proba(r)).collect(),
            (Classifier::Cnn(m), Inputs::Sequences(s)) => m.predict_proba_all(s),
            (c, _) => Err(Error::config(format!("{} model received the wrong kind of input", c.kind()))),
        }
    }

    /// Argmax class index per input; ties go to the lowest index.
    pub fn predict(&self, inputs: Inputs<'_>) -> Result<Vec<usize>> {
        Ok(self.scores(inputs)?.iter().map(|s| argmax(s)).collect())
    }
}

/// Hyperparameters for whichever model is being trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub svm: SvmConfig,
    pub nn: TrainConfig,
    pub cnn: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { svm: SvmConfig::default(), nn: default_nn_config(), cnn: default_cnn_config() }
    }
}

/// Trains `kind` on the given inputs. `vocab` is only read by the CNN.
pub fn train(kind: ModelKind, inputs: Inputs<'_>, y: &[usize], vocab: usize, cfg: &ClassifierConfig) -> Result<Classifier> {
    match (kind, inputs) {
        (ModelKind::Svm, Inputs::Dense(x)) => train_svm(x, y, &cfg.svm).map(Classifier::Svm),
        (ModelKind::Nn, Inputs::Dense(x)) => train_nn(x, y, &cfg.nn).map(Classifier::Nn),
        (ModelKind::Cnn, Inputs::Sequences(s)) => train_cnn(s, y, vocab, &cfg.cnn).map(Classifier::Cnn),
        (ModelKind::Cnn, _) => Err(Error::config("cnn requires character sequence input")),
        (k, _) => Err(Error::config(format!("{k} requires a dense feature matrix"))),
    }
}
