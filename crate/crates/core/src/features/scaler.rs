use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::matrix::Matrix;

/// Per-column min-max scaling to `[0, 1]` over the fitting rows.
/// Constant columns map to 0. Values outside the fitted range are not
/// clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Self {
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for r in x.iter_rows() {
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if x.rows() == 0 {
            min.iter_mut().for_each(|m| *m = 0.0);
            max.iter_mut().for_each(|m| *m = 0.0);
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        Self { min, range }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), row.len())?;
        for ((v, lo), r) in row.iter_mut().zip(&self.min).zip(&self.range) {
            *v = if *r > 0.0 { (*v - lo) / r } else { 0.0 };
        }
        Ok(())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.transform_row(out.row_mut(i))?;
        }
        Ok(out)
    }
}
