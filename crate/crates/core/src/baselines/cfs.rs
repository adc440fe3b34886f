//! Correlation feature selection: rank columns by |Pearson r| with the target.

use crate::nn::Matrix;
use crate::{Error, Result};

/// Pearson correlation of two equal-length samples; 0 when either side is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Indices of the `k` columns with the largest |r|, best first. Ties go to
/// the lower column index.
pub fn cfs_select(x: &Matrix, y: &[f64], k: usize) -> Result<Vec<usize>> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if k > x.cols() {
        return Err(Error::Selection(format!("asked for {k} of {} features", x.cols())));
    }
    let my = y.iter().sum::<f64>() / y.len().max(1) as f64;
    if y.iter().all(|&v| v == my) {
        return Err(Error::Selection("target has zero variance".into()));
    }
    let mut scored: Vec<(usize, f64)> = (0..x.cols())
        .map(|c| (c, pearson(&x.column(c), y).abs()))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(c, _)| c).collect())
}
