use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{accuracy, macro_f1, mcc, per_class_f1, ConfusionMatrix};
use crate::corpus::{Language, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub features: String,
    pub label_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClassF1 {
    pub welsh: f64,
    pub english: f64,
    pub irish: f64,
    pub scottish: f64,
}

impl PerClassF1 {
    pub fn get(&self, l: Language) -> f64 {
        match l {
            Language::Welsh => self.welsh,
            Language::English => self.english,
            Language::Irish => self.irish,
            Language::Scottish => self.scottish,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub f1: PerClassF1,
}

/// Unrounded metrics of one evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn new(meta: ReportMeta, confusion: ConfusionMatrix) -> Result<Self> {
        if confusion.classes() != NUM_CLASSES {
            return Err(Error::data(format!("report needs a {NUM_CLASSES}-class confusion matrix")));
        }
        let f = per_class_f1(&confusion);
        let metrics = Metrics {
            accuracy: accuracy(&confusion),
            macro_f1: macro_f1(&confusion),
            mcc: mcc(&confusion),
            f1: PerClassF1 { welsh: f[0], english: f[1], irish: f[2], scottish: f[3] },
        };
        Ok(Self { meta, metrics, confusion })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::config(format!("unknown report format '{s}' (table, json or csv)"))),
        }
    }
}

pub const CSV_HEADER: &str =
    "model,features,label_fraction,seed,accuracy,macro_f1,mcc,f1_welsh,f1_english,f1_irish,f1_scottish";

/// Integer percentage, half rounded up. The tiny nudge absorbs binary
/// representation error such as `0.985 * 100 = 98.49999999999999`.
pub fn percent(v: f64) -> String {
    format!("{}%", (v * 100.0 + 0.5 + 1e-9).floor() as i64)
}

fn feature_label(f: &str) -> &str {
    match f {
        "ngram" => "n-gram",
        "ngram+stats" => "n-gram+text stat",
        "vae" => "VAE",
        "lda" => "LDA",
        "vae+ngram" => "VAE+n-gram",
        "lda+ngram" => "LDA+n-gram",
        "clusters+ngram" => "clusters+n-gram",
        other => other,
    }
}

fn csv_row(r: &EvalReport) -> String {
    let m = &r.metrics;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.meta.model,
        r.meta.features,
        r.meta.label_fraction,
        r.meta.seed,
        m.accuracy,
        m.macro_f1,
        m.mcc,
        m.f1.welsh,
        m.f1.english,
        m.f1.irish,
        m.f1.scottish
    )
}

/// Comparison table in the layout of the published result tables: one block
/// per (model, label fraction), one row per feature set in input order.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut groups: Vec<(String, f64, Vec<&EvalReport>)> = Vec::new();
    for r in reports {
        match groups.iter_mut().find(|g| g.0 == r.meta.model && g.1 == r.meta.label_fraction) {
            Some(g) => g.2.push(r),
            None => groups.push((r.meta.model.clone(), r.meta.label_fraction, vec![r])),
        }
    }
    let header = ["Feature", "Accuracy", "MCC", "Mean F1", "F1 (Irish)", "F1 (Scottish)"];
    let mut out = String::new();
    for (i, (model, frac, rows)) in groups.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{} results, label fraction {}", model.to_uppercase(), frac);
        let cells: Vec<[String; 6]> = rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                [
                    feature_label(&r.meta.features).to_string(),
                    percent(m.accuracy),
                    percent(m.mcc),
                    percent(m.macro_f1),
                    percent(m.f1.irish),
                    percent(m.f1.scottish),
                ]
            })
            .collect();
        let width: Vec<usize> = (0..6)
            .map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |row: [&str; 6]| {
            let mut s = format!("{:<w$}", row[0], w = width[0]);
            for c in 1..6 {
                let _ = write!(s, "  {:>w$}", row[c], w = width[c]);
            }
            s
        };
        let _ = writeln!(out, "{}", line(header));
        for r in &cells {
            let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]]));
        }
    }
    out
}

/// Confusion matrix with true labels as rows and predictions as columns.
pub fn render_confusion(r: &EvalReport) -> String {
    let names: Vec<String> = Language::ALL.iter().map(|l| l.name().to_string()).collect();
    let cw = r
        .confusion
        .counts()
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .chain(names.iter().map(|n| n.len()))
        .max()
        .unwrap_or(1);
    let lw = names.iter().map(String::len).max().unwrap_or(0);
    let mut out = format!("{:<lw$}", "true \\ pred", lw = lw.max(11));
    for n in &names {
        let _ = write!(out, "  {n:>cw$}");
    }
    out.push('\n');
    for (i, row) in r.confusion.counts().iter().enumerate() {
        let _ = write!(out, "{:<lw$}", names[i], lw = lw.max(11));
        for v in row {
            let _ = write!(out, "  {v:>cw$}");
        }
        out.push('\n');
    }
    out
}

pub fn render_report(r: &EvalReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Table => format!("{}\n{}", render_table(std::slice::from_ref(r)), render_confusion(r)),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).map_err(|e| Error::data(e.to_string()))?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => format!("{CSV_HEADER}\n{}\n", csv_row(r)),
    })
}

/// CSV with one metric row per report.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::confusion_matrix;

    fn sample() -> EvalReport {
        let y = [0, 1, 2, 3, 2, 3, 2, 0];
        let p = [0, 1, 2, 2, 2, 3, 3, 0];
        let meta = ReportMeta { model: "nn".into(), features: "vae+ngram".into(), label_fraction: 0.3, seed: 42 };
        EvalReport::new(meta, confusion_matrix(&y, &p).unwrap()).unwrap()
    }

    #[test]
    fn percentages_round_half_up() {
        assert_eq!(percent(0.978), "98%");
        assert_eq!(percent(0.985), "99%");
        assert_eq!(percent(0.9749), "97%");
        assert_eq!(percent(0.0), "0%");
        assert_eq!(percent(1.0), "100%");
        assert_eq!(percent(-0.055), "-5%");
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample();
        let s = render_report(&r, ReportFormat::Json).unwrap();
        let back: EvalReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["meta"]["label_fraction"], 0.3);
        assert!(v["metrics"]["f1"]["scottish"].is_number());
        assert_eq!(v["confusion"][2], serde_json::json!([0, 0, 2, 1]));
    }

    #[test]
    fn csv_header_is_stable() {
        let s = render_report(&sample(), ReportFormat::Csv).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("nn,vae+ngram,0.3,42,0.75,"));
        assert_eq!(render_csv(&[sample(), sample()]).lines().count(), 3);
    }

    #[test]
    fn table_layout() {
        let t = render_report(&sample(), ReportFormat::Table).unwrap();
        assert!(t.starts_with("NN results, label fraction 0.3\n"));
        assert!(t.contains("VAE+n-gram"));
        assert!(t.contains("75%"));
        assert!(t.contains("scottish"));
        let mut other = sample();
        other.meta.model = "svm".into();
        let both = render_table(&[sample(), other, sample()]);
        assert_eq!(both.matches("results, label fraction").count(), 2);
    }
}
