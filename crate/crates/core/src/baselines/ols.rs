//! Ordinary least squares via the normal equations of the centred problem.

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Column indices (into the matrix passed to `predict`) of each weight.
    pub features: Vec<usize>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// True when a ridge term had to be added to make the system solvable.
    pub jittered: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|r| {
                let row = x.row(r);
                self.intercept
                    + self
                        .features
                        .iter()
                        .zip(&self.weights)
                        .map(|(&c, w)| w * row[c])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// In-place Cholesky factorisation of a symmetric matrix stored row-major.
/// Fails when a pivot is not clearly positive relative to `tol`.
fn cholesky(a: &mut [f64], p: usize, tol: f64) -> bool {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return false;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], p: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            z[i] -= l[i * p + k] * z[k];
        }
        z[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            z[i] -= l[k * p + i] * z[k];
        }
        z[i] /= l[i * p + i];
    }
    z
}

/// Fits `y ≈ intercept + Σ w_j x_j` over every column of `x`.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    fit_columns(x, y, &(0..x.cols()).collect::<Vec<_>>())
}

pub fn ols_predict(model: &LinearModel, x: &Matrix) -> Vec<f64> {
    model.predict(x)
}

/// Fits on the listed columns of `x`; the model keeps those indices.
pub fn fit_columns(x: &Matrix, y: &[f64], columns: &[usize]) -> Result<LinearModel> {
    let n = x.rows();
    let p = columns.len();
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} rows but {} targets", y.len())));
    }
    if n <= p + 1 {
        return Err(Error::Rank(format!("{n} rows cannot determine {p} weights plus an intercept")));
    }
    let nf = n as f64;
    let means: Vec<f64> = columns
        .iter()
        .map(|&c| (0..n).map(|r| x.get(r, c)).sum::<f64>() / nf)
        .collect();
    let y_mean = y.iter().sum::<f64>() / nf;

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut centred = vec![0.0; p];
    for r in 0..n {
        let row = x.row(r);
        for (j, (&c, m)) in columns.iter().zip(&means).enumerate() {
            centred[j] = row[c] - m;
        }
        let dy = y[r] - y_mean;
        for i in 0..p {
            rhs[i] += centred[i] * dy;
            for j in 0..=i {
                gram[i * p + j] += centred[i] * centred[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j * p + i] = gram[i * p + j];
        }
    }

    let max_diag = (0..p).map(|i| gram[i * p + i]).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
    for attempt in 0..8 {
        let mut a = gram.clone();
        for i in 0..p {
            a[i * p + i] += jitter;
        }
        if cholesky(&mut a, p, tol) {
            let weights = cholesky_solve(&a, p, &rhs);
            if weights.iter().all(|w| w.is_finite()) {
                if jitter > 0.0 {
                    log::warn!("near-singular least-squares system; solved with ridge jitter {jitter:e}");
                }
                let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
                return Ok(LinearModel {
                    features: columns.to_vec(),
                    weights,
                    intercept,
                    jittered: jitter > 0.0,
                });
            }
        }
        jitter = scale * 1e-10 * 100f64.powi(attempt);
    }
    Err(Error::Rank("normal equations singular even with ridge jitter".into()))
}
