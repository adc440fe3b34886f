//! Versioned, self-describing checkpoint documents.
//!
//! A checkpoint is a JSON object carrying the model config, every layer as a
//! named block with explicit shapes and row-major values, the normalization
//! statistics, the feature groups, target scaling and training metadata.
//! Floats are written in shortest round-trip form, so save → load is
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupSpec, NormStats};
use crate::model::{Block, ModelConfig, VminNet};
use crate::nn::{Activation, DenseLayer, Matrix};
use crate::transfer::TargetInfo;
use crate::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub frozen_blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: VminNet,
    pub norm_stats: NormStats,
    pub group_spec: GroupSpec,
    pub target: TargetInfo,
    pub metadata: TrainingMetadata,
}

impl Checkpoint {
    pub fn model_config(&self) -> &ModelConfig {
        self.net.config()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockRecord {
    name: String,
    block: Block,
    activation: Activation,
    weight_shape: [usize; 2],
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    format_version: u64,
    model_config: ModelConfig,
    blocks: Vec<BlockRecord>,
    norm_stats: NormStats,
    group_spec: GroupSpec,
    target: TargetInfo,
    metadata: TrainingMetadata,
}

fn to_document(c: &Checkpoint) -> Document {
    let cfg = c.net.config();
    let blocks = c
        .net
        .layers()
        .iter()
        .zip(cfg.layer_names())
        .zip(cfg.layer_blocks())
        .map(|((l, name), block)| BlockRecord {
            name,
            block,
            activation: l.activation(),
            weight_shape: [l.out_dim(), l.in_dim()],
            weight: l.weight().as_slice().to_vec(),
            bias: l.bias().to_vec(),
        })
        .collect();
    Document {
        format_version: FORMAT_VERSION,
        model_config: cfg.clone(),
        blocks,
        norm_stats: c.norm_stats.clone(),
        group_spec: c.group_spec.clone(),
        target: c.target.clone(),
        metadata: c.metadata.clone(),
    }
}

fn integrity(block: &str, message: impl Into<String>) -> Error {
    Error::Integrity {
        block: block.to_string(),
        message: message.into(),
    }
}

fn from_document(doc: Document) -> Result<Checkpoint> {
    let cfg = doc.model_config;
    cfg.validate()?;
    let names = cfg.layer_names();
    let kinds = cfg.layer_blocks();
    let shapes = cfg.layer_shapes();
    if doc.blocks.len() != names.len() {
        return Err(integrity(
            "*",
            format!("config implies {} blocks, file has {}", names.len(), doc.blocks.len()),
        ));
    }
    let mut layers = Vec::with_capacity(names.len());
    for (i, rec) in doc.blocks.into_iter().enumerate() {
        let (in_dim, out_dim) = shapes[i];
        if rec.name != names[i] || rec.block != kinds[i] {
            return Err(integrity(
                &rec.name,
                format!("expected block `{}` at position {i}", names[i]),
            ));
        }
        if rec.weight_shape != [out_dim, in_dim] {
            return Err(integrity(
                &rec.name,
                format!(
                    "stored shape {:?} but config requires [{out_dim}, {in_dim}]",
                    rec.weight_shape
                ),
            ));
        }
        if rec.weight.len() != out_dim * in_dim || rec.bias.len() != out_dim {
            return Err(integrity(
                &rec.name,
                format!(
                    "{} weight / {} bias values for shape [{out_dim}, {in_dim}]",
                    rec.weight.len(),
                    rec.bias.len()
                ),
            ));
        }
        if rec.weight.iter().chain(&rec.bias).any(|v| !v.is_finite()) {
            return Err(integrity(&rec.name, "non-finite parameter"));
        }
        let weight = Matrix::from_vec(out_dim, in_dim, rec.weight)?;
        layers.push(DenseLayer::new(weight, rec.bias, rec.activation)?);
    }
    doc.norm_stats.validate()?;
    doc.group_spec.validate()?;
    if doc.group_spec.model_group_sizes() != cfg.group_sizes {
        return Err(integrity(
            "group_spec",
            format!(
                "groups {:?} do not match model config {:?}",
                doc.group_spec.model_group_sizes(),
                cfg.group_sizes
            ),
        ));
    }
    doc.target.validate(cfg.output_dim)?;
    Ok(Checkpoint {
        net: VminNet::from_layers(cfg, layers)?,
        norm_stats: doc.norm_stats,
        group_spec: doc.group_spec,
        target: doc.target,
        metadata: doc.metadata,
    })
}

fn parse_error(source: &str, e: impl std::fmt::Display) -> Error {
    Error::Document {
        path: source.to_string(),
        message: e.to_string(),
    }
}

pub fn save_checkpoint<W: Write>(c: &Checkpoint, mut sink: W) -> Result<()> {
    let doc = to_document(c);
    serde_json::to_writer_pretty(&mut sink, &doc).map_err(|e| parse_error("<checkpoint>", e))?;
    sink.write_all(b"\n")
        .and_then(|_| sink.flush())
        .map_err(|e| Error::io("<checkpoint>", e))
}

pub fn load_checkpoint<R: Read>(source: R) -> Result<Checkpoint> {
    load_named(source, "<checkpoint>")
}

fn load_named<R: Read>(source: R, name: &str) -> Result<Checkpoint> {
    let value: serde_json::Value =
        serde_json::from_reader(source).map_err(|e| parse_error(name, e))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| parse_error(name, "missing integer `format_version`"))?;
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let doc: Document = serde_json::from_value(value).map_err(|e| parse_error(name, e))?;
    from_document(doc)
}

pub fn save_checkpoint_file(c: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    save_checkpoint(c, BufWriter::new(file))
}

pub fn load_checkpoint_file(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_named(BufReader::new(file), &path.display().to_string())
}
