use serde::{Deserialize, Serialize};

use super::{FeatureSet, HyperParams, Seeds, UnsupKind};
use crate::classify::{self, Classifier, ClassifierConfig, Inputs, ModelKind, TrainConfig};
use crate::corpus::{Language, LabeledCorpus};
use crate::error::{Error, Result};
use crate::features::{encode_all, word_ngrams, Alphabet, MinMaxScaler, StatFeaturizer};
use crate::matrix::Matrix;
use crate::unsup::{fit_lda, fit_vae, ClusterEnsemble, LdaConfig, LdaModel, VaeModel, LATENT_DIM};

/// Encoded classifier input.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Dense(Matrix),
    Sequences(Vec<Vec<u32>>),
}

impl Encoded {
    pub fn inputs(&self) -> Inputs<'_> {
        match self {
            Encoded::Dense(m) => Inputs::Dense(m),
            Encoded::Sequences(s) => Inputs::Sequences(s),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_dense(self) -> Result<Matrix> {
        match self {
            Encoded::Dense(m) => Ok(m),
            Encoded::Sequences(_) => Err(Error::config("character features have no dense form")),
        }
    }
}

/// Everything fitted on unlabelled training text for one feature set.
///
/// Dense output is `[unsupervised block ‖ n-gram block]`, min-max scaled per
/// column over the fitting texts. The n-gram block is already scaled by its
/// featurizer, so the final scaler leaves it unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    features: FeatureSet,
    max_len: usize,
    stat: Option<StatFeaturizer>,
    alphabet: Option<Alphabet>,
    ensemble: Option<ClusterEnsemble>,
    vae: Option<VaeModel>,
    lda: Option<LdaModel>,
    scaler: Option<MinMaxScaler>,
}

impl FeaturePipeline {
    /// Fits only the extractors `features` needs. Takes texts alone, so no
    /// label can reach any unsupervised model.
    pub fn fit(texts: &[&str], features: FeatureSet, hyper: &HyperParams, seeds: &Seeds) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::data("cannot fit features on an empty corpus"));
        }
        let unsup = features.unsup();
        let stat = if features.uses_ngram() || unsup == Some(UnsupKind::Clusters) {
            Some(StatFeaturizer::fit(texts, &hyper.ngram, true)?)
        } else {
            None
        };
        let alphabet = (features == FeatureSet::Chars || unsup == Some(UnsupKind::Vae)).then(|| Alphabet::fit(texts.iter().copied()));
        let mut p = Self {
            features,
            max_len: hyper.max_len,
            stat,
            alphabet,
            ensemble: None,
            vae: None,
            lda: None,
            scaler: None,
        };
        match unsup {
            Some(UnsupKind::Clusters) => {
                let x = p.stat_matrix(texts)?;
                p.ensemble = Some(ClusterEnsemble::fit(&x, seeds.clusters())?);
            }
            Some(UnsupKind::Vae) => {
                let seqs = p.sequences(texts)?;
                let cfg = TrainConfig { seed: seeds.vae(), ..hyper.vae };
                p.vae = Some(fit_vae(&seqs, p.alphabet_size()?, &cfg)?);
            }
            Some(UnsupKind::Lda) => {
                let docs: Vec<Vec<String>> = texts.iter().map(|t| word_ngrams(t)).collect();
                let cfg = LdaConfig { seed: seeds.lda(), ..hyper.lda };
                p.lda = Some(fit_lda(&docs, &cfg)?);
            }
            None => {}
        }
        if features != FeatureSet::Chars {
            let raw = p.transform_raw(texts)?.into_dense()?;
            p.scaler = Some(MinMaxScaler::fit(&raw));
        }
        Ok(p)
    }

    /// Restores caches skipped by serialisation.
    pub(crate) fn prepare(&mut self) -> Result<()> {
        if let Some(e) = &mut self.ensemble {
            e.prepare()?;
        }
        if let Some(l) = &mut self.lda {
            l.prepare();
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureSet {
        self.features
    }

    pub fn ensemble(&self) -> Option<&ClusterEnsemble> {
        self.ensemble.as_ref()
    }

    pub fn vae(&self) -> Option<&VaeModel> {
        self.vae.as_ref()
    }

    pub fn lda(&self) -> Option<&LdaModel> {
        self.lda.as_ref()
    }

    /// Alphabet size including the pad and unknown ids.
    pub fn alphabet_size(&self) -> Result<usize> {
        self.alphabet.as_ref().map(Alphabet::size).ok_or_else(|| Error::config("pipeline has no character alphabet"))
    }

    fn stat_featurizer(&self) -> Result<&StatFeaturizer> {
        self.stat.as_ref().ok_or_else(|| Error::config("pipeline has no statistical featurizer"))
    }

    /// Scaled `[n-gram ‖ avg_word_len ‖ avg_consonants]` rows.
    pub fn stat_matrix(&self, texts: &[&str]) -> Result<Matrix> {
        self.stat_featurizer()?.transform(texts)
    }

    pub fn sequences(&self, texts: &[&str]) -> Result<Vec<Vec<u32>>> {
        let a = self.alphabet.as_ref().ok_or_else(|| Error::config("pipeline has no character alphabet"))?;
        Ok(encode_all(a, texts, self.max_len))
    }

    fn ngram_block(&self, stat: &Matrix) -> Result<Matrix> {
        let v = self.stat_featurizer()?.vocab().len();
        let mut out = Matrix::zeros(stat.rows(), v);
        for i in 0..stat.rows() {
            out.row_mut(i).copy_from_slice(&stat.row(i)[..v]);
        }
        Ok(out)
    }

    fn unsup_block(&self, texts: &[&str], stat: Option<&Matrix>) -> Result<Option<Matrix>> {
        Ok(match self.features.unsup() {
            Some(UnsupKind::Clusters) => {
                let e = self.ensemble.as_ref().ok_or_else(|| Error::config("missing cluster ensemble"))?;
                Some(match stat {
                    Some(x) => e.transform(x)?,
                    None => e.transform(&self.stat_matrix(texts)?)?,
                })
            }
            Some(UnsupKind::Vae) => {
                let v = self.vae.as_ref().ok_or_else(|| Error::config("missing VAE"))?;
                Some(v.encode_all(&self.sequences(texts)?)?)
            }
            Some(UnsupKind::Lda) => {
                let l = self.lda.as_ref().ok_or_else(|| Error::config("missing LDA model"))?;
                let rows: Vec<Vec<f64>> = texts.iter().map(|t| l.infer(&word_ngrams(t))).collect();
                Some(if rows.is_empty() { Matrix::zeros(0, l.topics()) } else { Matrix::from_rows(&rows)? })
            }
            None => None,
        })
    }

    /// Feature rows before the final scaling.
    pub fn transform_raw(&self, texts: &[&str]) -> Result<Encoded> {
        if self.features == FeatureSet::Chars {
            return Ok(Encoded::Sequences(self.sequences(texts)?));
        }
        let stat = if self.stat.is_some() { Some(self.stat_matrix(texts)?) } else { None };
        let unsup = self.unsup_block(texts, stat.as_ref())?;
        let ngram = match (&stat, self.features) {
            (Some(s), FeatureSet::NgramStats) => Some(s.clone()),
            (Some(s), f) if f.uses_ngram() => Some(self.ngram_block(s)?),
            _ => None,
        };
        let m = match (unsup, ngram) {
            (Some(u), Some(n)) => u.hstack(&n)?,
            (Some(u), None) => u,
            (None, Some(n)) => n,
            (None, None) => return Err(Error::config(format!("feature set {} produced no columns", self.features))),
        };
        Ok(Encoded::Dense(m))
    }

    /// Classifier-ready input.
    pub fn transform(&self, texts: &[&str]) -> Result<Encoded> {
        match (self.transform_raw(texts)?, &self.scaler) {
            (Encoded::Dense(m), Some(s)) => Ok(Encoded::Dense(s.transform(&m)?)),
            (e, _) => Ok(e),
        }
    }

    /// Column names of the dense output.
    pub fn feature_names(&self) -> Result<Vec<String>> {
        let mut names = match self.features.unsup() {
            Some(UnsupKind::Clusters) => ["kmeans", "gmm", "birch", "agglomerative"]
                .iter()
                .flat_map(|m| (0..4).map(move |c| format!("{m}_{c}")))
                .collect(),
            Some(UnsupKind::Vae) => (0..LATENT_DIM).map(|i| format!("z{i}")).collect(),
            Some(UnsupKind::Lda) => {
                let k = self.lda.as_ref().map_or(0, LdaModel::topics);
                (0..k).map(|i| format!("topic_{i}")).collect()
            }
            None => Vec::new(),
        };
        match self.features {
            FeatureSet::Chars => return Err(Error::config("character features have no column names")),
            FeatureSet::NgramStats => names.extend(self.stat_featurizer()?.feature_names()),
            f if f.uses_ngram() => names.extend(self.stat_featurizer()?.vocab().ngrams().iter().cloned()),
            _ => {}
        }
        Ok(names)
    }
}

/// Metadata of a trained pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub model: ModelKind,
    pub features: FeatureSet,
    pub feature_rows: usize,
    pub labelled_rows: usize,
}

/// Feature pipeline plus classifier: raw text in, language out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub pipeline: FeaturePipeline,
    pub classifier: Classifier,
    pub summary: TrainingSummary,
}

impl TrainedPipeline {
    /// Fits features on every text of `unlabelled` and the classifier on
    /// `labelled` only.
    pub fn fit(
        unlabelled: &[&str],
        labelled: &LabeledCorpus,
        model: ModelKind,
        features: FeatureSet,
        hyper: &HyperParams,
        seeds: &Seeds,
    ) -> Result<Self> {
        features.check_model(model)?;
        let pipeline = FeaturePipeline::fit(unlabelled, features, hyper, seeds)?;
        let x = model_input(&pipeline, model, &labelled.texts())?;
        let s = seeds.classifier();
        let cfg = ClassifierConfig {
            svm: classify::SvmConfig { seed: s, ..hyper.svm },
            nn: TrainConfig { seed: s, ..hyper.nn },
            cnn: TrainConfig { seed: s, ..hyper.cnn },
        };
        let vocab = if features == FeatureSet::Chars { pipeline.alphabet_size()? } else { 0 };
        let classifier = classify::train(model, x.inputs(), &labelled.label_indices(), vocab, &cfg)?;
        let summary = TrainingSummary { model, features, feature_rows: unlabelled.len(), labelled_rows: labelled.len() };
        Ok(Self { pipeline, classifier, summary })
    }

    pub fn predict_indices(&self, texts: &[&str]) -> Result<Vec<usize>> {
        let x = model_input(&self.pipeline, self.summary.model, texts)?;
        self.classifier.predict(x.inputs())
    }

    pub fn predict(&self, texts: &[&str]) -> Result<Vec<Language>> {
        self.predict_indices(texts)?
            .into_iter()
            .map(|i| Language::from_index(i).ok_or_else(|| Error::data(format!("class index {i} out of range"))))
            .collect()
    }
}

/// The dense network reads character ids as a fixed-length vector scaled
/// into `[0, 1]` by alphabet size, as the VAE does.
fn model_input(pipeline: &FeaturePipeline, model: ModelKind, texts: &[&str]) -> Result<Encoded> {
    match (pipeline.transform(texts)?, model) {
        (Encoded::Sequences(seqs), ModelKind::Nn) => {
            let a = pipeline.alphabet_size()? as f64;
            let cols = seqs.first().map_or(0, Vec::len);
            let data = seqs.iter().flatten().map(|&i| i as f64 / a).collect();
            Ok(Encoded::Dense(Matrix::from_vec(seqs.len(), cols, data)?))
        }
        (e, _) => Ok(e),
    }
}
