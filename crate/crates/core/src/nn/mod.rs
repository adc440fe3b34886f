//! Minimal dense-network engine: row-major matrices, affine layers with
//! Leaky ReLU, mean squared error, Adam and finite-difference gradient checks.
//!
//! All arithmetic is `f64`. Nothing here allocates threads or global state, so
//! results are a pure function of inputs and seeds.

mod activation;
mod adam;
mod dense;
mod gradcheck;
mod loss;
mod matrix;

pub use activation::{leaky_relu, Activation, DEFAULT_LEAKY_SLOPE};
pub use adam::{AdamConfig, AdamState, SlotUpdate};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseLayer};
pub use gradcheck::{grad_check, relative_error, Evaluation, GradCheckReport, GRAD_CHECK_FLOOR};
pub use loss::mse_loss;
pub use matrix::Matrix;
