//! Affine layer `y = activation(W x + b)` over row batches.
//!
//! Weights are `out × in`, so a batch `X` of shape `batch × in` maps to
//! `X · Wᵀ + 1 bᵀ`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{Activation, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weight: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub pre_activation: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    /// Gradient with respect to the layer input; `None` when not requested.
    pub input: Option<Matrix>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        activation.validate()?;
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(Matrix::zeros(out_dim, in_dim), vec![0.0; out_dim], activation)
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config(format!(
                "layer dimensions must be positive, got {in_dim}->{out_dim}"
            )));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self::new(Matrix::from_vec(out_dim, in_dim, data)?, vec![0.0; out_dim], activation)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }

    /// Both parameter tensors, weight first.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (self.weight.as_mut_slice(), &mut self.bias)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "layer expects {} input columns, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// `W x + b` for every row of `x`, before the activation.
    pub fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let (out_dim, in_dim) = self.weight.shape();
        let w = self.weight.as_slice();
        let mut z = Matrix::zeros(x.rows(), out_dim);
        for b in 0..x.rows() {
            let xr = x.row(b);
            let zr = z.row_mut(b);
            for (o, zo) in zr.iter_mut().enumerate() {
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                let mut acc = self.bias[o];
                for (wi, xi) in wr.iter().zip(xr) {
                    acc += wi * xi;
                }
                *zo = acc;
            }
        }
        Ok(z)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        let pre = self.pre_activation(x)?;
        let out = match self.activation {
            Activation::Identity => pre.clone(),
            act => act.forward(&pre),
        };
        Ok((out, DenseCache { pre_activation: pre }))
    }

    /// Gradients of `sum(upstream ⊙ forward(x))` with respect to the weight,
    /// bias and input. Recomputes the pre-activation from `x`.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<DenseGrads> {
        let pre = self.pre_activation(x)?;
        self.backward_cached(x, &DenseCache { pre_activation: pre }, upstream, true)
    }

    pub fn backward_cached(
        &self,
        x: &Matrix,
        cache: &DenseCache,
        upstream: &Matrix,
        want_input: bool,
    ) -> Result<DenseGrads> {
        self.check_input(x)?;
        let (out_dim, in_dim) = self.weight.shape();
        if upstream.shape() != (x.rows(), out_dim) || cache.pre_activation.shape() != upstream.shape()
        {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?} does not match layer output {:?}",
                upstream.shape(),
                (x.rows(), out_dim)
            )));
        }

        let delta = match self.activation {
            Activation::Identity => upstream.clone(),
            act => {
                let mut d = upstream.clone();
                for (dv, &z) in d.as_mut_slice().iter_mut().zip(cache.pre_activation.as_slice()) {
                    *dv *= act.derivative(z);
                }
                d
            }
        };

        let mut gw = Matrix::zeros(out_dim, in_dim);
        let mut gb = vec![0.0; out_dim];
        let mut gx = want_input.then(|| Matrix::zeros(x.rows(), in_dim));
        let w = self.weight.as_slice();
        for b in 0..x.rows() {
            let xr = x.row(b);
            let dr = delta.row(b);
            for (o, &d) in dr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let gwr = &mut gw.as_mut_slice()[o * in_dim..(o + 1) * in_dim];
                for (g, &xi) in gwr.iter_mut().zip(xr) {
                    *g += d * xi;
                }
            }
            if let Some(gx) = gx.as_mut() {
                let gxr = gx.row_mut(b);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let wr = &w[o * in_dim..(o + 1) * in_dim];
                    for (g, &wi) in gxr.iter_mut().zip(wr) {
                        *g += d * wi;
                    }
                }
            }
        }
        Ok(DenseGrads {
            weight: gw,
            bias: gb,
            input: gx,
        })
    }
}

/// Free-function form of [`DenseLayer::forward`].
pub fn dense_forward(layer: &DenseLayer, x: &Matrix) -> Result<Matrix> {
    layer.forward(x)
}

/// Free-function form of [`DenseLayer::backward`].
pub fn dense_backward(layer: &DenseLayer, x: &Matrix, upstream: &Matrix) -> Result<DenseGrads> {
    layer.backward(x, upstream)
}
