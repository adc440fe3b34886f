use serde::{Deserialize, Serialize};

use crate::dataset::{make_average_target, TargetMatrix};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Whether the network predicts every pattern or the per-die pattern mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    #[default]
    Multi,
    Average,
}

impl TargetMode {
    pub fn apply(&self, targets: &TargetMatrix) -> TargetMatrix {
        match self {
            TargetMode::Multi => targets.clone(),
            TargetMode::Average => make_average_target(targets),
        }
    }
}

/// Maps millivolt targets to a unit scale for training: per-pattern
/// centring and one pooled scale, so relative pattern weights in the loss
/// are unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl TargetScaler {
    pub fn fit(targets: &Matrix) -> Result<Self> {
        let (n, o) = targets.shape();
        if n == 0 || o == 0 {
            return Err(Error::Argument("cannot fit target scaling on an empty matrix".into()));
        }
        let mut mean = vec![0.0; o];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(targets.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = 0.0;
        for r in 0..n {
            for (m, v) in mean.iter().zip(targets.row(r)) {
                ss += (v - m) * (v - m);
            }
        }
        let sd = (ss / (n * o) as f64).sqrt();
        Ok(Self {
            mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        })
    }

    pub fn transform(&self, mv: &Matrix) -> Matrix {
        let mut out = mv.clone();
        for r in 0..out.rows() {
            for (v, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v = (*v - m) / self.scale;
            }
        }
        out
    }

    pub fn inverse(&self, scaled: &Matrix) -> Matrix {
        let mut out = scaled.clone();
        for r in 0..out.rows() {
            for (v, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v = *v * self.scale + m;
            }
        }
        out
    }
}

/// Everything needed to turn network outputs back into named mV predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub mode: TargetMode,
    pub pattern_names: Vec<String>,
    pub scaler: TargetScaler,
}

impl TargetInfo {
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        if self.pattern_names.len() != output_dim || self.scaler.mean.len() != output_dim {
            return Err(Error::Integrity {
                block: "target".into(),
                message: format!(
                    "{} pattern names / {} scaling entries for {output_dim} outputs",
                    self.pattern_names.len(),
                    self.scaler.mean.len()
                ),
            });
        }
        if !(self.scaler.scale > 0.0 && self.scaler.scale.is_finite()) {
            return Err(Error::Integrity {
                block: "target".into(),
                message: "target scale must be positive".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_round_trip_and_moments() {
        let t = Matrix::from_rows(&[[700.0, 650.0], [710.0, 640.0], [690.0, 660.0]]).unwrap();
        let s = TargetScaler::fit(&t).unwrap();
        assert_eq!(s.mean, vec![700.0, 650.0]);
        let z = s.transform(&t);
        let pooled: f64 = z.as_slice().iter().map(|v| v * v).sum::<f64>() / 6.0;
        assert!((pooled - 1.0).abs() < 1e-12);
        let back = s.inverse(&z);
        for (a, b) in back.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_targets_keep_unit_scale() {
        let t = Matrix::from_rows(&[[5.0], [5.0]]).unwrap();
        assert_eq!(TargetScaler::fit(&t).unwrap().scale, 1.0);
    }
}
