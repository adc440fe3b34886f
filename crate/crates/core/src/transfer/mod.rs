//! Base-node pretraining, hidden-block transplant and frozen fine-tuning.
//!
//! The hard-freeze path copies the pretrained hidden layers into a freshly
//! initialized target network and excludes them from optimization. The soft
//! path leaves them trainable and adds `λ · ‖θ_hidden − θ_hidden,base‖²` to
//! the loss; as `λ → ∞` the two coincide.

mod regularizer;
mod target;
mod task;
mod train;

pub use regularizer::l2_to_base;
pub use target::{TargetInfo, TargetMode, TargetScaler};
pub use task::{rmse_mv, RmseSummary, Task, TaskSet};
pub use train::{fit, EpochRecord, TrainConfig, TrainReport, PAPER_EPOCHS};

use std::collections::BTreeSet;

use crate::checkpoint::{Checkpoint, TrainingMetadata};
use crate::model::{Block, ModelConfig, VminNet};
use crate::{Error, Result};

/// Trains a base network on a prepared base-node task.
pub fn pretrain(task: &Task, model: &ModelConfig, config: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    if !config.freeze.is_empty() {
        return Err(Error::Config("pretraining does not freeze any block".into()));
    }
    let mut net = VminNet::build(model, config.seed)?;
    let report = fit(&mut net, task, config)?;
    Ok((checkpoint_for(net, task, config, &report), report))
}

/// Builds a target network whose hidden layers are bit-exact copies of the
/// base checkpoint's; every other block is freshly initialized from `seed`.
pub fn transplant(base: &Checkpoint, target: &ModelConfig, seed: u64) -> Result<VminNet> {
    let base_cfg = base.model_config();
    let base_shapes = hidden_shapes(base_cfg);
    let target_shapes = hidden_shapes(target);
    if base_shapes != target_shapes {
        return Err(Error::Transfer(format!(
            "base hidden stack {base_shapes:?} (embedding {}) vs target {target_shapes:?} (embedding {})",
            base_cfg.embedding_dim, target.embedding_dim
        )));
    }
    let mut net = VminNet::build(target, seed)?;
    let src = base.net.block_layers(Block::Hidden);
    let dst = net.block_layers(Block::Hidden);
    for (s, d) in src.into_iter().zip(dst) {
        net.layers_mut()[d] = base.net.layers()[s].clone();
    }
    Ok(net)
}

/// `(in, out)` of every hidden layer, starting from the embedding width.
fn hidden_shapes(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let mut prev = cfg.embedding_dim;
    cfg.hidden_dims
        .iter()
        .map(|&h| {
            let s = (prev, h);
            prev = h;
            s
        })
        .collect()
}

/// Fine-tunes `net` on a target-node task. Blocks in `config.freeze` are
/// never written; with `config.lambda > 0` the hidden block is pulled toward
/// its values at entry.
pub fn finetune(mut net: VminNet, task: &Task, config: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    let report = fit(&mut net, task, config)?;
    Ok((checkpoint_for(net, task, config, &report), report))
}

fn checkpoint_for(net: VminNet, task: &Task, config: &TrainConfig, report: &TrainReport) -> Checkpoint {
    Checkpoint {
        net,
        norm_stats: task.norm_stats.clone(),
        group_spec: task.groups.clone(),
        target: task.target.clone(),
        metadata: TrainingMetadata {
            seed: config.seed,
            epochs: report.epochs.len(),
            final_loss: report.final_train_loss(),
            frozen_blocks: config.freeze.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        },
    }
}
