//! The grouped-feature V_min network.
//!
//! ```text
//! group_1 ─ fusion_0 (m_1→k) ┐
//! group_2 ─ fusion_1 (m_2→k) ├ concat (k·g) → embedding (leaky) → hidden_* (leaky) → output
//!   ...                      ┘
//! ```
//!
//! Fusion layers are affine with no activation. The embedding and every
//! hidden layer use Leaky ReLU; the output layer is affine.

use serde::{Deserialize, Serialize};

use crate::dataset::InputLayout;
use crate::nn::{Activation, DenseCache, DenseGrads, DenseLayer, Matrix, DEFAULT_LEAKY_SLOPE};
use crate::rng::{stream_rng, tags};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input width of each model group, in wiring order.
    pub group_sizes: Vec<usize>,
    pub fused_per_group: usize,
    pub embedding_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub leaky_slope: f64,
}

/// Width hyperparameters shared by base and target networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub fused_per_group: usize,
    pub embedding_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub leaky_slope: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            fused_per_group: 2,
            embedding_dim: 32,
            hidden_dims: vec![64, 16, 64],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl Architecture {
    pub fn config(&self, group_sizes: Vec<usize>, output_dim: usize) -> ModelConfig {
        ModelConfig {
            group_sizes,
            fused_per_group: self.fused_per_group,
            embedding_dim: self.embedding_dim,
            hidden_dims: self.hidden_dims.clone(),
            output_dim,
            leaky_slope: self.leaky_slope,
        }
    }
}

impl ModelConfig {
    pub fn new(group_sizes: Vec<usize>, output_dim: usize) -> Self {
        Architecture::default().config(group_sizes, output_dim)
    }

    /// Base-node network: three POSt groups, 63 outputs.
    pub fn base_default() -> Self {
        Self::new(vec![5, 19, 21], 63)
    }

    /// Target-node network: three POSt groups plus 124 odometers, 27 outputs.
    pub fn target_default() -> Self {
        Self::new(vec![12, 7, 18, 124], 27)
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.is_empty() {
            return Err(Error::Config("model needs at least one feature group".into()));
        }
        let dims = self
            .group_sizes
            .iter()
            .chain(&self.hidden_dims)
            .chain([&self.fused_per_group, &self.embedding_dim, &self.output_dim]);
        if dims.into_iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("all model dimensions must be >= 1: {self:?}")));
        }
        Activation::leaky(self.leaky_slope).validate()
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn fused_width(&self) -> usize {
        self.fused_per_group * self.n_groups()
    }

    /// `(in, out)` of every layer in storage order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes: Vec<(usize, usize)> = self
            .group_sizes
            .iter()
            .map(|&m| (m, self.fused_per_group))
            .collect();
        shapes.push((self.fused_width(), self.embedding_dim));
        let mut prev = self.embedding_dim;
        for &h in &self.hidden_dims {
            shapes.push((prev, h));
            prev = h;
        }
        shapes.push((prev, self.output_dim));
        shapes
    }

    /// Closed-form parameter count, `Σ out·in + out`.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(i, o)| o * i + o).sum()
    }

    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_groups()).map(|i| format!("fusion_{i}")).collect();
        names.push("embedding".into());
        names.extend((0..self.hidden_dims.len()).map(|j| format!("hidden_{j}")));
        names.push("output".into());
        names
    }

    pub fn layer_blocks(&self) -> Vec<Block> {
        let mut blocks = vec![Block::Fusion; self.n_groups()];
        blocks.push(Block::Embedding);
        blocks.extend(std::iter::repeat_n(Block::Hidden, self.hidden_dims.len()));
        blocks.push(Block::Output);
        blocks
    }
}

/// Parameter partitions used for freezing and transplanting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Fusion,
    Embedding,
    Hidden,
    Output,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Fusion, Block::Embedding, Block::Hidden, Block::Output];

    pub fn name(&self) -> &'static str {
        match self {
            Block::Fusion => "fusion",
            Block::Embedding => "embedding",
            Block::Hidden => "hidden",
            Block::Output => "output",
        }
    }
}

/// Layer indices and parameter count of one partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamPartition {
    pub block: Block,
    pub layers: Vec<usize>,
    pub param_count: usize,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Matrix>,
    caches: Vec<DenseCache>,
}

impl ForwardTrace {
    /// Sign pattern of every Leaky ReLU pre-activation.
    pub fn kink_pattern(&self, net: &VminNet) -> Vec<bool> {
        net.layers
            .iter()
            .zip(&self.caches)
            .filter(|(l, _)| l.activation().is_piecewise())
            .flat_map(|(_, c)| c.pre_activation.as_slice().iter().map(|&z| z >= 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VminNet {
    config: ModelConfig,
    layers: Vec<DenseLayer>,
}

impl VminNet {
    /// Allocates every layer with seeded Glorot-uniform weights and zero biases.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, &[tags::INIT]);
        let leaky = Activation::leaky(config.leaky_slope);
        let layers = config
            .layer_shapes()
            .into_iter()
            .zip(config.layer_blocks())
            .map(|((i, o), block)| {
                let act = match block {
                    Block::Fusion | Block::Output => Activation::Identity,
                    Block::Embedding | Block::Hidden => leaky,
                };
                DenseLayer::glorot(i, o, act, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    /// Assembles a network from explicit layers, checking them against `config`.
    pub fn from_layers(config: ModelConfig, layers: Vec<DenseLayer>) -> Result<Self> {
        config.validate()?;
        let names = config.layer_names();
        let shapes = config.layer_shapes();
        if layers.len() != shapes.len() {
            return Err(Error::Integrity {
                block: "*".into(),
                message: format!("config needs {} layers, got {}", shapes.len(), layers.len()),
            });
        }
        for ((layer, &(i, o)), name) in layers.iter().zip(&shapes).zip(&names) {
            if (layer.in_dim(), layer.out_dim()) != (i, o) {
                return Err(Error::Integrity {
                    block: name.clone(),
                    message: format!(
                        "shape {}x{} does not match config {}x{}",
                        layer.out_dim(),
                        layer.in_dim(),
                        o,
                        i
                    ),
                });
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn block_layers(&self, block: Block) -> Vec<usize> {
        self.config
            .layer_blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == block)
            .map(|(i, _)| i)
            .collect()
    }

    /// Disjoint, exhaustive partition of the parameters into the four blocks.
    pub fn partition_params(&self) -> Vec<ParamPartition> {
        Block::ALL
            .iter()
            .map(|&block| {
                let layers = self.block_layers(block);
                let param_count = layers.iter().map(|&i| self.layers[i].param_count()).sum();
                ParamPartition {
                    block,
                    layers,
                    param_count,
                }
            })
            .collect()
    }

    /// Optimizer slot sizes: weight then bias for every layer.
    pub fn slot_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight().as_slice().len(), l.bias().len()])
            .collect()
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.config
            .layer_names()
            .into_iter()
            .flat_map(|n| [format!("{n}.weight"), format!("{n}.bias")])
            .collect()
    }

    /// Gathers each group's columns from a full feature matrix.
    pub fn split_groups(&self, x: &Matrix, layout: &InputLayout) -> Result<Vec<Matrix>> {
        if layout.group_sizes() != self.config.group_sizes {
            return Err(Error::Schema(format!(
                "input layout groups {:?} do not match model groups {:?}",
                layout.group_sizes(),
                self.config.group_sizes
            )));
        }
        if let Some(&c) = layout.all_columns().iter().find(|&&c| c >= x.cols()) {
            return Err(Error::Schema(format!(
                "group column index {c} outside a {}-column input",
                x.cols()
            )));
        }
        Ok(layout.columns.iter().map(|cols| x.select_columns(cols)).collect())
    }

    /// Forward pass over a full (already normalized) feature matrix.
    pub fn forward(&self, x: &Matrix, layout: &InputLayout) -> Result<Matrix> {
        self.forward_groups(&self.split_groups(x, layout)?)
    }

    pub fn forward_groups(&self, groups: &[Matrix]) -> Result<Matrix> {
        Ok(self.forward_trace(groups)?.0)
    }

    pub fn forward_trace(&self, groups: &[Matrix]) -> Result<(Matrix, ForwardTrace)> {
        let g = self.config.n_groups();
        if groups.len() != g {
            return Err(Error::Schema(format!("model has {g} groups, got {} inputs", groups.len())));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut fused = Vec::with_capacity(g);
        for (layer, x) in self.layers[..g].iter().zip(groups) {
            let (h, cache) = layer.forward_cached(x)?;
            inputs.push(x.clone());
            caches.push(cache);
            fused.push(h);
        }
        let mut act = Matrix::hstack(&fused)?;
        for layer in &self.layers[g..] {
            let (next, cache) = layer.forward_cached(&act)?;
            inputs.push(std::mem::replace(&mut act, next));
            caches.push(cache);
        }
        Ok((act, ForwardTrace { inputs, caches }))
    }

    /// Backpropagates `d_output` (gradient of the loss w.r.t. the network
    /// output) through every layer.
    pub fn backward(&self, trace: &ForwardTrace, d_output: &Matrix) -> Result<Vec<DenseGrads>> {
        let g = self.config.n_groups();
        let n = self.layers.len();
        let mut grads: Vec<Option<DenseGrads>> = vec![None; n];
        let mut upstream = d_output.clone();
        for i in (g..n).rev() {
            let mut gi =
                self.layers[i].backward_cached(&trace.inputs[i], &trace.caches[i], &upstream, true)?;
            upstream = gi.input.take().expect("input gradient requested");
            grads[i] = Some(gi);
        }
        let widths = vec![self.config.fused_per_group; g];
        for (i, up) in upstream.hsplit(&widths)?.into_iter().enumerate() {
            grads[i] =
                Some(self.layers[i].backward_cached(&trace.inputs[i], &trace.caches[i], &up, false)?);
        }
        Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
    }

    /// All parameters as one vector, layer by layer, weight before bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight().as_slice());
            out.extend_from_slice(l.bias());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let (w, b) = l.params_mut();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            b.copy_from_slice(&flat[offset..offset + b.len()]);
            offset += b.len();
        }
        Ok(())
    }
}

/// Flattens per-layer gradients in the same order as [`VminNet::to_flat`].
pub fn flatten_grads(grads: &[DenseGrads]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weight.as_slice().iter().chain(&g.bias).copied())
        .collect()
}
