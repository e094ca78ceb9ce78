//! Classification metrics and result reports.

mod report;

use serde::{Deserialize, Serialize};

use crate::corpus::{Language, NUM_CLASSES};
use crate::error::{Error, Result};

pub use report::{
    percent, render_confusion, render_csv, render_report, render_table, EvalReport, Metrics, PerClassF1,
    ReportFormat, ReportMeta, CSV_HEADER,
};

/// Counts indexed `[true][predicted]` in class-index order (Welsh, English,
/// Irish, Scottish). Also usable in a smaller `n x n` mode for tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::data("confusion matrix must be square and non-empty"));
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    confusion_matrix_n(y_true, y_pred, NUM_CLASSES)
}

pub fn confusion_matrix_n(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), got: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::data("cannot evaluate zero samples"));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= classes || p >= classes {
            return Err(Error::data(format!("label index {} out of range", t.max(p))));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.trace() as f64 / cm.total() as f64
}

/// F1 per class; 0 when precision and recall are both 0 or undefined.
pub fn per_class_f1(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let (col, row) = (cm.col_sum(c) as f64, cm.row_sum(c) as f64);
            let p = if col > 0.0 { tp / col } else { 0.0 };
            let r = if row > 0.0 { tp / row } else { 0.0 };
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .collect()
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let f = per_class_f1(cm);
    f.iter().sum::<f64>() / f.len() as f64
}

/// Multiclass Matthews correlation (Gorodkin's R_K); 0 when undefined.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let k = cm.classes();
    let c = cm.trace() as f64;
    let s = cm.total() as f64;
    let t: Vec<f64> = (0..k).map(|i| cm.row_sum(i) as f64).collect();
    let p: Vec<f64> = (0..k).map(|j| cm.col_sum(j) as f64).collect();
    let pt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let tt: f64 = t.iter().map(|v| v * v).sum();
    let denom = ((s * s - pp) * (s * s - tt)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (c * s - pt) / denom
    }
}

/// Label order used by every report.
pub fn class_order() -> [Language; NUM_CLASSES] {
    Language::ALL
}
