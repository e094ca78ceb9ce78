use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clid::classify::ModelKind;
use clid::corpus::{
    corpus_stats, deduplicate, generate_synthetic, load_corpus, preprocess, split, subsample_labels, CorpusFormat,
    LabelBudget, LabeledCorpus, Language, SplitSpec, SynthConfig,
};
use clid::eval::ReportFormat;
use clid::features::{fit_pca, write_matrix_csv, NgramConfig, StatFeaturizer};
use clid::matrix::Matrix;
use clid::runner::{
    load_artifact, run_grid, save_artifact, Artifact, ExperimentPlan, FeaturePipeline, FeatureSet, HyperParams,
    Seeds, TrainedPipeline,
};
use clid::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "clid", version, about = "Language identification for Irish, Scottish Gaelic, Welsh and English")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean and merge labelled sources into one corpus file.
    Ingest(IngestArgs),
    /// Per-class sentence and word counts.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// table or json
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Seeded train/test split.
    Split(SplitArgs),
    /// Export feature matrices
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Fit and inspect unsupervised feature models
    #[command(subcommand)]
    Unsup(UnsupCmd),
    /// Train a classifier pipeline (same as `classify train`).
    Train(TrainArgs),
    /// Predict one label per input line (same as `classify predict`).
    Predict(PredictArgs),
    /// Train and apply classifiers
    #[command(subcommand)]
    Classify(ClassifyCmd),
    /// Run an experiment grid from a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// table, json or csv
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic fixture corpus.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        per_class: usize,
        #[arg(long, default_value_t = 17)]
        avg_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// `file.tsv` with `label<TAB>text` lines, or `code=file.txt` with one
    /// sentence per line (code is ga, gd, cy or en).
    #[arg(required = true)]
    sources: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Drop repeated sentences, keeping the first.
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Subcommand)]
enum FeaturesCmd {
    /// Write the scaled statistical feature matrix as CSV.
    Dump {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write 2-D PCA coordinates with labels here.
        #[arg(long)]
        pca_out: Option<PathBuf>,
        /// Leave out avg_word_len and avg_consonants.
        #[arg(long)]
        no_stats: bool,
        #[arg(long)]
        max_features: Option<usize>,
    },
}

#[derive(Subcommand)]
enum UnsupCmd {
    /// Fit an unsupervised model on the corpus text (labels are ignored).
    Fit {
        /// clusters, vae or lda
        #[arg(long)]
        method: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// TOML file with hyperparameter tables such as [vae] or [lda].
        #[arg(long)]
        hyper: Option<PathBuf>,
    },
    /// Stream unsupervised feature vectors as CSV.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top terms per LDA topic.
    LdaTopics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// 2-D coordinates with cluster ids (clusters) or latent means (vae).
    Map {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ClassifyCmd {
    Train(TrainArgs),
    Predict(PredictArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// svm, nn or cnn
    #[arg(long)]
    model: String,
    /// chars, ngram, ngram+stats, clusters, vae, lda, clusters+ngram,
    /// vae+ngram or lda+ngram
    #[arg(long)]
    features: String,
    /// Training corpus; all of its text feeds the feature extractors.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Share of labels per class the classifier may use.
    #[arg(long, default_value_t = 1.0)]
    label_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// TOML file with hyperparameter tables such as [nn] or [ngram].
    #[arg(long)]
    hyper: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_file: PathBuf,
    /// Plain text, one sentence per line.
    #[arg(long)]
    input: PathBuf,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<LabeledCorpus> {
    let (corpus, report) = load_corpus(path, CorpusFormat::Tsv)?;
    if corpus.is_empty() {
        return Err(Error::Data(format!("{}: no usable sentences", path.display())));
    }
    if report.dropped > 0 {
        eprintln!("{}: dropped {} lines that were empty after cleaning", path.display(), report.dropped);
    }
    Ok(corpus)
}

fn hyper_from(path: Option<&Path>) -> Result<HyperParams> {
    let Some(p) = path else {
        return Ok(HyperParams::default());
    };
    let text = std::fs::read_to_string(p)?;
    let v: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?;
    HyperParams::with_overrides(&v)
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Ingest(a) => ingest(a)?,
        Cmd::Stats { input, format } => {
            let s = corpus_stats(&load(&input)?);
            match format.as_str() {
                "table" => print!("{}", s.to_table()),
                "json" => println!("{}", s.to_json()),
                other => return Err(Error::Config(format!("unknown stats format '{other}' (table or json)"))),
            }
        }
        Cmd::Split(a) => {
            let corpus = load(&a.input)?;
            let spec = SplitSpec { train_fraction: a.train_fraction, seed: a.seed, stratified: !a.no_stratify };
            let (train, test) = split(&corpus, &spec)?;
            train.save_tsv(&a.train_out)?;
            test.save_tsv(&a.test_out)?;
            eprintln!("train {} / test {} sentences; test hash {}", train.len(), test.len(), test.content_hash());
        }
        Cmd::Features(FeaturesCmd::Dump { input, out, pca_out, no_stats, max_features }) => {
            let corpus = load(&input)?;
            let texts = corpus.texts();
            let mut cfg = NgramConfig::default();
            if let Some(m) = max_features {
                cfg.max_features = m;
            }
            let stat = StatFeaturizer::fit(&texts, &cfg, !no_stats)?;
            let x = stat.transform(&texts)?;
            let labels = label_codes(&corpus);
            write_matrix_csv(output(out.as_deref())?, &stat.feature_names(), &x, Some(&labels))?;
            if let Some(p) = pca_out {
                let z = fit_pca(&x, 2)?.transform_matrix(&x)?;
                write_matrix_csv(output(Some(&p))?, &["pc1".into(), "pc2".into()], &z, Some(&labels))?;
            }
        }
        Cmd::Unsup(u) => unsup(u)?,
        Cmd::Train(a) | Cmd::Classify(ClassifyCmd::Train(a)) => train(a)?,
        Cmd::Predict(a) | Cmd::Classify(ClassifyCmd::Predict(a)) => predict(a)?,
        Cmd::Experiment { config, format, out } => {
            let format: ReportFormat = format.parse()?;
            let plan = ExperimentPlan::load(&config)?;
            let bundle = run_grid(&plan)?;
            let text = match format {
                ReportFormat::Table => bundle.render_table(),
                ReportFormat::Json => bundle.to_json()?,
                ReportFormat::Csv => bundle.render_csv(),
            };
            let mut w = output(out.as_deref())?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            let first = bundle.failures().next().map(|f| f.kind);
            if let Some(kind) = first {
                eprintln!("{} of {} cells failed", bundle.failures().count(), bundle.cells.len());
                return Ok(exit_code(kind));
            }
        }
        Cmd::Synth { seed, per_class, avg_len, out } => {
            if per_class == 0 {
                return Err(Error::Config("per-class must be at least 1".into()));
            }
            let corpus = generate_synthetic(&SynthConfig { seed, per_class, avg_len });
            let mut w = output(out.as_deref())?;
            corpus.write_tsv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(0)
}

fn label_codes(corpus: &LabeledCorpus) -> Vec<String> {
    corpus.labels().iter().map(|l| l.code().to_string()).collect()
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut samples = Vec::new();
    for src in &a.sources {
        let part = match src.split_once('=') {
            Some((code, path)) => {
                let lang: Language = code.parse().map_err(|_| Error::Config(format!("unknown language code '{code}'")))?;
                let f = File::open(path)?;
                let mut pairs = Vec::new();
                let mut dropped = 0;
                for line in BufReader::new(f).lines() {
                    let t = preprocess(&line?);
                    if t.is_empty() {
                        dropped += 1;
                    } else {
                        pairs.push((lang, t));
                    }
                }
                eprintln!("{path}: {} sentences, {dropped} dropped", pairs.len());
                LabeledCorpus::from_pairs(pairs)
            }
            None => {
                let (c, r) = load_corpus(Path::new(src), CorpusFormat::Tsv)?;
                eprintln!("{src}: {} sentences, {} dropped", r.loaded, r.dropped);
                c
            }
        };
        samples.extend(part.samples().iter().cloned());
    }
    let mut corpus = LabeledCorpus::new(samples);
    if a.dedup {
        let before = corpus.len();
        corpus = deduplicate(&corpus);
        eprintln!("removed {} duplicates", before - corpus.len());
    }
    corpus.save_tsv(&a.out)?;
    eprintln!("wrote {} sentences to {}", corpus.len(), a.out.display());
    Ok(())
}

fn unsup(cmd: UnsupCmd) -> Result<()> {
    match cmd {
        UnsupCmd::Fit { method, input, out, seed, hyper } => {
            let features = match method.as_str() {
                "clusters" => FeatureSet::Clusters,
                "vae" => FeatureSet::Vae,
                "lda" => FeatureSet::Lda,
                other => return Err(Error::Config(format!("unknown method '{other}' (clusters, vae or lda)"))),
            };
            let corpus = load(&input)?;
            let hyper = hyper_from(hyper.as_deref())?;
            let p = FeaturePipeline::fit(&corpus.texts(), features, &hyper, &Seeds::new(seed))?;
            save_artifact(&out, &Artifact::Unsup(p))?;
        }
        UnsupCmd::Transform { model, input, out } => {
            let p = unsup_model(&model)?;
            let corpus = load(&input)?;
            let x = p.transform_raw(&corpus.texts())?.into_dense()?;
            write_matrix_csv(output(out.as_deref())?, &p.feature_names()?, &x, Some(&label_codes(&corpus)))?;
        }
        UnsupCmd::LdaTopics { model, top } => {
            let p = unsup_model(&model)?;
            let lda = p.lda().ok_or_else(|| Error::Config(format!("{} is not an LDA model", model.display())))?;
            let cols: Vec<Vec<(String, f64)>> = (0..lda.topics()).map(|t| lda.top_terms(t, top)).collect::<Result<_>>()?;
            let width = cols.iter().flatten().map(|(t, _)| t.chars().count()).max().unwrap_or(0).max(7);
            let mut w = output(None)?;
            let header: Vec<String> = (1..=cols.len()).map(|t| format!("{:<width$}", format!("Topic {t}"))).collect();
            writeln!(w, "{}", header.join("  ").trim_end())?;
            for i in 0..top {
                let row: Vec<String> = cols
                    .iter()
                    .map(|c| format!("{:<width$}", c.get(i).map_or("", |(t, _)| t.as_str())))
                    .collect();
                writeln!(w, "{}", row.join("  ").trim_end())?;
            }
            w.flush()?;
        }
        UnsupCmd::Map { model, input, out } => {
            let p = unsup_model(&model)?;
            let corpus = load(&input)?;
            let texts = corpus.texts();
            let labels = label_codes(&corpus);
            let (names, x) = if let Some(e) = p.ensemble() {
                let stat = p.stat_matrix(&texts)?;
                let mut rows = Vec::with_capacity(stat.rows());
                for r in stat.iter_rows() {
                    let mut v = e.project(r)?;
                    v.extend(e.assignments(r)?.iter().map(|&a| a as f64));
                    rows.push(v);
                }
                let names = ["pc1", "pc2", "kmeans", "gmm", "birch", "agglomerative"];
                (names.map(String::from).to_vec(), Matrix::from_rows(&rows)?)
            } else if let Some(v) = p.vae() {
                (vec!["z0".into(), "z1".into()], v.encode_all(&p.sequences(&texts)?)?)
            } else {
                return Err(Error::Config("map needs a clusters or vae model".into()));
            };
            write_matrix_csv(output(out.as_deref())?, &names, &x, Some(&labels))?;
        }
    }
    Ok(())
}

fn unsup_model(path: &Path) -> Result<FeaturePipeline> {
    match load_artifact(path)? {
        Artifact::Unsup(p) => Ok(p),
        Artifact::Classifier(_) => Err(Error::Config(format!("{} holds a classifier, not an unsupervised model", path.display()))),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let model: ModelKind = a.model.parse()?;
    let features: FeatureSet = a.features.parse()?;
    features.check_model(model)?;
    let hyper = hyper_from(a.hyper.as_deref())?;
    let seeds = Seeds::new(a.seed);
    let corpus = load(&a.input)?;
    let labelled = subsample_labels(&corpus, &LabelBudget { fraction: a.label_fraction, seed: seeds.budget() })?;
    let t = TrainedPipeline::fit(&corpus.texts(), &labelled, model, features, &hyper, &seeds)?;
    save_artifact(&a.out, &Artifact::Classifier(t))?;
    eprintln!("trained {model} on {features} features: {} labelled of {} sentences", labelled.len(), corpus.len());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let t = match load_artifact(&a.model_file)? {
        Artifact::Classifier(t) => t,
        Artifact::Unsup(_) => {
            return Err(Error::Config(format!("{} holds an unsupervised model, not a classifier", a.model_file.display())))
        }
    };
    let lines: Vec<String> =
        BufReader::new(File::open(&a.input)?).lines().map(|l| l.map(|s| preprocess(&s))).collect::<io::Result<_>>()?;
    let texts: Vec<&str> = lines.iter().map(String::as_str).collect();
    let mut w = output(None)?;
    for l in t.predict(&texts)? {
        writeln!(w, "{}", l.code())?;
    }
    w.flush()?;
    Ok(())
}
