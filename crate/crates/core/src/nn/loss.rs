use super::Matrix;
use crate::{Error, Result};

/// Mean squared error over every entry, with its gradient:
/// `loss = Σ (pred − target)² / (n·o)`, `grad = 2 (pred − target) / (n·o)`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.as_slice().len();
    if count == 0 {
        return Err(Error::Dimension("mse of an empty matrix".into()));
    }
    let scale = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(count);
    for (p, t) in pred.as_slice().iter().zip(target.as_slice()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d * scale);
    }
    Ok((loss * scale, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
}
