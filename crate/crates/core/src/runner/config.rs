use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureSet;
use crate::classify::{default_cnn_config, default_nn_config, ModelKind, SvmConfig, TrainConfig};
use crate::corpus::{LabelBudget, SplitSpec, SynthConfig};
use crate::error::{Error, Result};
use crate::features::{NgramConfig, DEFAULT_MAX_LEN};
use crate::seed;
use crate::unsup::{default_vae_config, LdaConfig};

/// Master seed plus optional per-component overrides. Components without an
/// override draw `seed::derive(master, name)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    pub split: Option<u64>,
    pub budget: Option<u64>,
    pub clusters: Option<u64>,
    pub vae: Option<u64>,
    pub lda: Option<u64>,
    pub classifier: Option<u64>,
}

impl Default for Seeds {
    fn default() -> Self {
        Self::new(seed::DEFAULT_SEED)
    }
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Self { master, split: None, budget: None, clusters: None, vae: None, lda: None, classifier: None }
    }

    fn pick(&self, o: Option<u64>, name: &str) -> u64 {
        o.unwrap_or_else(|| seed::derive(self.master, name))
    }

    pub fn split(&self) -> u64 {
        self.pick(self.split, "split")
    }

    pub fn budget(&self) -> u64 {
        self.pick(self.budget, "budget")
    }

    pub fn clusters(&self) -> u64 {
        self.pick(self.clusters, "clusters")
    }

    pub fn vae(&self) -> u64 {
        self.pick(self.vae, "vae")
    }

    pub fn lda(&self) -> u64 {
        self.pick(self.lda, "lda")
    }

    pub fn classifier(&self) -> u64 {
        self.pick(self.classifier, "classifier")
    }
}

/// Every tunable of the pipeline. Seeds inside the nested configs are
/// replaced by [`Seeds`] at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub ngram: NgramConfig,
    pub max_len: usize,
    pub vae: TrainConfig,
    pub lda: LdaConfig,
    pub svm: SvmConfig,
    pub nn: TrainConfig,
    pub cnn: TrainConfig,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            ngram: NgramConfig::default(),
            max_len: DEFAULT_MAX_LEN,
            vae: default_vae_config(),
            lda: LdaConfig::default(),
            svm: SvmConfig::default(),
            nn: default_nn_config(),
            cnn: default_cnn_config(),
        }
    }
}

impl HyperParams {
    /// Defaults with the given TOML table merged on top.
    pub fn with_overrides(overrides: &toml::Value) -> Result<Self> {
        let mut base = toml::Value::try_from(Self::default()).map_err(|e| Error::config(e.to_string()))?;
        merge(&mut base, overrides, "hyper")?;
        base.try_into().map_err(|e: toml::de::Error| Error::config(format!("[hyper]: {}", e.message())))
    }
}

fn merge(base: &mut toml::Value, over: &toml::Value, path: &str) -> Result<()> {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let p = format!("{path}.{k}");
                if k == "seed" {
                    return Err(Error::config(format!("{p}: component seeds are set in the [seeds] table")));
                }
                let slot = b.get_mut(k).ok_or_else(|| Error::config(format!("unknown hyperparameter '{p}'")))?;
                merge(slot, v, &p)?;
            }
            Ok(())
        }
        (toml::Value::Table(_), _) => Err(Error::config(format!("'{path}' must be a table"))),
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSource {
    Path(PathBuf),
    Synthetic(SynthConfig),
}

/// One fully resolved grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub train_fraction: f64,
    pub stratified: bool,
    pub label_fraction: f64,
    pub features: FeatureSet,
    pub model: ModelKind,
    pub seeds: Seeds,
    pub hyper: HyperParams,
    /// Render a confusion matrix panel for this cell.
    pub confusion: bool,
}

impl ExperimentConfig {
    pub fn new(corpus: CorpusSource, model: ModelKind, features: FeatureSet) -> Self {
        Self {
            corpus,
            train_fraction: 0.8,
            stratified: true,
            label_fraction: 1.0,
            features,
            model,
            seeds: Seeds::default(),
            hyper: HyperParams::default(),
            confusion: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.features.check_model(self.model)?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::config(format!("label_fraction must lie in (0, 1], got {}", self.label_fraction)));
        }
        if self.hyper.max_len == 0 {
            return Err(Error::config("max_len must be positive"));
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, seed: self.seeds.split(), stratified: self.stratified }
    }

    pub fn label_budget(&self) -> LabelBudget {
        LabelBudget { fraction: self.label_fraction, seed: self.seeds.budget() }
    }
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_true() -> bool {
    true
}

fn default_fraction() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    corpus_path: Option<PathBuf>,
    synthetic: Option<SynthConfig>,
    #[serde(default = "default_train_fraction")]
    train_fraction: f64,
    #[serde(default = "default_true")]
    stratified: bool,
    #[serde(default)]
    seeds: Seeds,
    hyper: Option<toml::Value>,
    #[serde(default)]
    grid: GridSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridSection {
    models: Vec<ModelKind>,
    features: Vec<FeatureSet>,
    label_fractions: Vec<f64>,
    confusion: bool,
    cell: Vec<CellSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSpec {
    model: ModelKind,
    features: FeatureSet,
    #[serde(default = "default_fraction")]
    label_fraction: f64,
    #[serde(default)]
    confusion: bool,
}

/// A parsed experiment file: the ordered list of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub cells: Vec<ExperimentConfig>,
    pub seeds: Seeds,
    /// SHA-256 of the resolved cells, hex encoded.
    pub config_hash: String,
}

impl ExperimentPlan {
    pub fn from_cells(cells: Vec<ExperimentConfig>) -> Result<Self> {
        let seeds = cells.first().map(|c| c.seeds).ok_or_else(|| Error::config("experiment grid has no cells"))?;
        let json = serde_json::to_vec(&cells).map_err(|e| Error::config(e.to_string()))?;
        let config_hash = Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { cells, seeds, config_hash })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses experiment TOML. Relative corpus paths resolve against
    /// `base_dir`.
    ///
    /// The `[grid]` shorthand lists expand to the cross product in the order
    /// model, label fraction, feature set, silently skipping invalid
    /// model/feature pairs. Explicit `[[grid.cell]]` entries follow and must
    /// be valid. With neither, the grid is a single nn/ngram cell.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
        let corpus = match (file.corpus_path, file.synthetic) {
            (Some(p), None) => CorpusSource::Path(if p.is_absolute() { p } else { base_dir.join(p) }),
            (None, Some(s)) => CorpusSource::Synthetic(s),
            (Some(_), Some(_)) => return Err(Error::config("set either corpus_path or [synthetic], not both")),
            (None, None) => return Err(Error::config("missing corpus_path (or a [synthetic] table)")),
        };
        let hyper = match &file.hyper {
            Some(v) => HyperParams::with_overrides(v)?,
            None => HyperParams::default(),
        };
        let base = ExperimentConfig {
            corpus,
            train_fraction: file.train_fraction,
            stratified: file.stratified,
            label_fraction: 1.0,
            features: FeatureSet::Ngram,
            model: ModelKind::Nn,
            seeds: file.seeds,
            hyper,
            confusion: false,
        };
        let g = file.grid;
        let mut cells = Vec::new();
        let shorthand = !(g.models.is_empty() && g.features.is_empty() && g.label_fractions.is_empty());
        if shorthand || g.cell.is_empty() {
            let models = if g.models.is_empty() { vec![ModelKind::Nn] } else { g.models };
            let features = if g.features.is_empty() { vec![FeatureSet::Ngram] } else { g.features };
            let fractions = if g.label_fractions.is_empty() { vec![1.0] } else { g.label_fractions };
            for &model in &models {
                for &label_fraction in &fractions {
                    for &features in &features {
                        if features.check_model(model).is_ok() {
                            cells.push(ExperimentConfig { model, features, label_fraction, confusion: g.confusion, ..base.clone() });
                        }
                    }
                }
            }
        }
        for c in g.cell {
            c.features.check_model(c.model)?;
            cells.push(ExperimentConfig {
                model: c.model,
                features: c.features,
                label_fraction: c.label_fraction,
                confusion: c.confusion,
                ..base.clone()
            });
        }
        for c in &cells {
            c.validate()?;
        }
        Self::from_cells(cells)
    }
}
