use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    LeakyRelu { alpha: f64 },
}

impl Activation {
    pub fn leaky(alpha: f64) -> Self {
        Activation::LeakyRelu { alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Identity => Ok(()),
            Activation::LeakyRelu { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            Activation::LeakyRelu { alpha } => Err(Error::Config(format!(
                "leaky relu slope must be positive, got {alpha}"
            ))),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => x,
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation. At exactly zero the
    /// Leaky ReLU derivative is taken as 1.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, Activation::LeakyRelu { .. })
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        x.map(|v| self.apply(v))
    }

    pub fn backward(&self, x: &Matrix) -> Matrix {
        x.map(|v| self.derivative(v))
    }
}

/// Elementwise Leaky ReLU.
pub fn leaky_relu(x: &Matrix, alpha: f64) -> Matrix {
    Activation::leaky(alpha).forward(x)
}
