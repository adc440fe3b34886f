use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{l2_to_base, RmseSummary, Task};
use crate::model::{Block, VminNet};
use crate::nn::{mse_loss, AdamConfig, AdamState, DenseLayer, SlotUpdate};
use crate::rng::{stream_rng, tags};
use crate::{Error, Result};

/// Epoch budget of the long-run preset.
pub const PAPER_EPOCHS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the L2 pull of hidden parameters toward their starting
    /// values; 0 disables it.
    pub lambda: f64,
    pub freeze: BTreeSet<Block>,
    /// Stop after this many epochs without a new best training loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            epochs: 2000,
            seed: 0,
            lambda: 0.0,
            freeze: BTreeSet::new(),
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn frozen_hidden() -> Self {
        Self {
            freeze: [Block::Hidden].into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean data loss over the epoch's mini-batches, in scaled target units.
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Full-batch training loss before the first update.
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub adam_steps: u64,
    pub initial_test_rmse: Option<f64>,
    pub final_test: Option<RmseSummary>,
    pub frozen_blocks: Vec<Block>,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(self.initial_train_loss, |e| e.train_loss)
    }
}

/// Mini-batch Adam on the multi-output MSE (plus the optional L2-to-start
/// term on the hidden block). Batches are drawn from a fresh seeded shuffle
/// each epoch; the last short batch is kept.
pub fn fit(net: &mut VminNet, task: &Task, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if task.group_sizes() != net.config().group_sizes || task.output_dim() != net.config().output_dim {
        return Err(Error::Schema(format!(
            "task groups {:?} -> {} outputs do not fit model {:?} -> {}",
            task.group_sizes(),
            task.output_dim(),
            net.config().group_sizes,
            net.config().output_dim
        )));
    }
    let started = Instant::now();
    let n = task.train.len();
    let hidden = net.block_layers(Block::Hidden);
    let anchor: Vec<DenseLayer> = if config.lambda > 0.0 {
        hidden.iter().map(|&i| net.layers()[i].clone()).collect()
    } else {
        Vec::new()
    };
    let blocks = net.config().layer_blocks();
    let trainable: Vec<bool> = blocks.iter().map(|b| !config.freeze.contains(b)).collect();
    let slot_names = net.slot_names();
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &net.slot_sizes())?;
    let mut rng = stream_rng(config.seed, &[tags::SHUFFLE]);

    let initial_train_loss = mse_loss(&net.forward_groups(&task.train.groups)?, &task.train.targets_scaled)?.0;
    let initial_test_rmse = task.evaluate(net)?.map(|r| r.aggregate);

    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(config.batch_size) {
            let (inputs, targets) = task.train.batch(rows);
            let (pred, trace) = net.forward_trace(&inputs)?;
            let (loss, d_pred) = mse_loss(&pred, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    lr: config.lr,
                    loss,
                });
            }
            total += loss * rows.len() as f64;
            let mut grads = net.backward(&trace, &d_pred)?;

            for (layer_idx, base) in hidden.iter().zip(&anchor) {
                let layer = &net.layers()[*layer_idx];
                let g = &mut grads[*layer_idx];
                let (_, gw) = l2_to_base(layer.weight().as_slice(), base.weight().as_slice(), config.lambda)?;
                let (_, gb) = l2_to_base(layer.bias(), base.bias(), config.lambda)?;
                g.weight.as_mut_slice().iter_mut().zip(gw).for_each(|(a, b)| *a += b);
                g.bias.iter_mut().zip(gb).for_each(|(a, b)| *a += b);
            }

            let mut updates = Vec::with_capacity(2 * grads.len());
            for (i, (layer, g)) in net.layers_mut().iter_mut().zip(&grads).enumerate() {
                if !trainable[i] {
                    continue;
                }
                let (w, b) = layer.params_mut();
                updates.push(SlotUpdate {
                    slot: 2 * i,
                    name: &slot_names[2 * i],
                    params: w,
                    grads: g.weight.as_slice(),
                });
                updates.push(SlotUpdate {
                    slot: 2 * i + 1,
                    name: &slot_names[2 * i + 1],
                    params: b,
                    grads: &g.bias,
                });
            }
            adam.step(&mut updates)?;
        }
        let train_loss = total / n as f64;
        epochs.push(EpochRecord { epoch, train_loss });

        if let Some(patience) = config.patience {
            if train_loss < best {
                best = train_loss;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    log::info!("early stop at epoch {epoch}: no improvement for {patience} epochs");
                    break;
                }
            }
        }
        if epoch % 500 == 0 {
            log::debug!("epoch {epoch}: train loss {train_loss:.6}");
        }
    }

    Ok(TrainReport {
        config: config.clone(),
        initial_train_loss,
        epochs,
        adam_steps: adam.step_count(),
        initial_test_rmse,
        final_test: task.evaluate(net)?,
        frozen_blocks: config.freeze.iter().copied().collect(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
