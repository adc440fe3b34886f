//! Grouped-feature neural regression of chip minimum operating voltage with
//! transfer from an abundant base technology node to a scarce target node.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small deterministic dense-network engine (layers, loss, Adam,
//!   finite-difference gradient checking).
//! - [`dataset`]: CSV ingestion, feature groups, min-max normalization, splits.
//! - [`model`]: the fusion / embedding / hidden / output network.
//! - [`transfer`]: pretraining, hidden-block transplant and frozen fine-tuning.
//! - [`baselines`]: correlation feature selection, OLS and gradient-boosted trees.
//! - [`synth`]: a paired two-node synthetic data generator.
//! - [`checkpoint`]: the versioned on-disk model format.
//! - [`experiment`]: the command implementations used by the `vmin` binary.

pub mod baselines;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
