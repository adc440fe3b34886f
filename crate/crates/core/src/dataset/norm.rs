use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::nn::Matrix;
use crate::{Error, Result};

/// Which rows the min/max statistics are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    #[default]
    Train,
    All,
}

/// Per-column minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub column_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// True when a column was constant over the fitting rows.
    pub fn is_degenerate(&self, col: usize) -> bool {
        self.max[col] == self.min[col]
    }

    pub fn degenerate_columns(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.is_degenerate(c)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() || self.min.len() != self.column_names.len() {
            return Err(Error::Schema("normalization stats have inconsistent lengths".into()));
        }
        if let Some(c) = (0..self.len()).find(|&c| !(self.max[c] >= self.min[c])) {
            return Err(Error::Schema(format!(
                "normalization column `{}` has max < min",
                self.column_names[c]
            )));
        }
        Ok(())
    }

    /// `(x − min) / (max − min)`; degenerate columns map to 0.
    pub fn apply_value(&self, col: usize, x: f64) -> f64 {
        let span = self.max[col] - self.min[col];
        if span == 0.0 {
            0.0
        } else {
            (x - self.min[col]) / span
        }
    }
}

/// Fits per-column min/max over exactly the given rows.
pub fn fit_minmax(features: &FeatureMatrix, rows: &[usize]) -> Result<NormStats> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot fit normalization on zero rows".into()));
    }
    let v = &features.values;
    let mut min = vec![f64::INFINITY; v.cols()];
    let mut max = vec![f64::NEG_INFINITY; v.cols()];
    for &r in rows {
        for (c, &x) in v.row(r).iter().enumerate() {
            min[c] = min[c].min(x);
            max[c] = max[c].max(x);
        }
    }
    let stats = NormStats {
        column_names: features.column_names.clone(),
        min,
        max,
    };
    for c in stats.degenerate_columns() {
        log::warn!(
            "feature `{}` is constant over the fitting rows; it will normalize to 0",
            stats.column_names[c]
        );
    }
    Ok(stats)
}

pub fn apply_minmax(features: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    let v = &features.values;
    if v.cols() != stats.len() {
        return Err(Error::Schema(format!(
            "features have {} columns, normalization stats have {}",
            v.cols(),
            stats.len()
        )));
    }
    if let Some(c) = (0..stats.len()).find(|&c| features.column_names[c] != stats.column_names[c]) {
        return Err(Error::Schema(format!(
            "column {c} is `{}` but normalization stats were fitted on `{}`",
            features.column_names[c], stats.column_names[c]
        )));
    }
    let mut out = Matrix::zeros(v.rows(), v.cols());
    for r in 0..v.rows() {
        for (c, (o, &x)) in out.row_mut(r).iter_mut().zip(v.row(r)).enumerate() {
            *o = stats.apply_value(c, x);
        }
    }
    Ok(FeatureMatrix {
        values: out,
        column_names: features.column_names.clone(),
        row_ids: features.row_ids.clone(),
    })
}
