//! Command implementations behind the `vmin` binary: synthesize, pretrain,
//! transfer, fit baselines, evaluate and run the seed-averaged ablation.
//!
//! Every command is a pure function of its inputs and seeds. Reports embed a
//! full echo of the run configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, BaselineKind, BaselineModel, GbtParams, DEFAULT_CFS_K};
use crate::checkpoint::{load_checkpoint_file, save_checkpoint_file, Checkpoint};
use crate::dataset::{
    apply_minmax, load_dataset, read_json, read_manifest, split, write_json, Dataset, GroupKind, GroupSpec,
    NodeLabel, NormScope,
};
use crate::model::{Architecture, Block, ModelConfig};
use crate::synth::{describe, gen_pair, read_spec};
use crate::transfer::{
    finetune, pretrain, rmse_mv, transplant, RmseSummary, TargetMode, Task, TrainConfig, TrainReport,
};
use crate::{Error, Result};

/// Which feature groups feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "post")]
    Post,
    #[default]
    #[serde(rename = "post+odo")]
    PostOdo,
}

impl FeatureSet {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::Post => "post",
            FeatureSet::PostOdo => "post+odo",
        }
    }

    /// Restricts a group spec to this feature set. Dropping odometers removes
    /// their group entirely, so the model is rebuilt with one group fewer.
    pub fn select(&self, groups: &GroupSpec) -> Result<GroupSpec> {
        match self {
            FeatureSet::Post => groups.without_kind(GroupKind::Odometer),
            FeatureSet::PostOdo => Ok(groups.clone()),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(FeatureSet::Post),
            "post+odo" => Ok(FeatureSet::PostOdo),
            other => Err(Error::Argument(format!("unknown feature set `{other}`"))),
        }
    }
}

/// Everything that shapes a single training or fitting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub target_mode: TargetMode,
    pub features: FeatureSet,
    pub norm_scope: NormScope,
    pub cfs_k: usize,
    pub gbt: GbtParams,
    /// Trunk widths of every network built for this run. A transferred
    /// network takes its hidden block from the base checkpoint, which must
    /// have been trained with the same widths.
    pub arch: Architecture,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::frozen_hidden(),
            train_fraction: 0.25,
            target_mode: TargetMode::Multi,
            features: FeatureSet::PostOdo,
            norm_scope: NormScope::Train,
            cfs_k: DEFAULT_CFS_K,
            gbt: GbtParams::default(),
            arch: Architecture::default(),
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.train.seed = seed;
        c
    }

    /// Network shape for `task` under this run's architecture.
    pub fn model_config(&self, task: &Task) -> ModelConfig {
        self.arch.config(task.group_sizes(), task.output_dim())
    }

    /// Splits with the run seed and prepares the task for `features`.
    pub fn task(&self, dataset: &Dataset, features: FeatureSet) -> Result<Task> {
        let groups = features.select(&dataset.groups)?;
        let split = split(dataset.n_rows(), self.train_fraction, self.seed())?;
        Task::prepare(dataset, &groups, &split, self.target_mode, self.norm_scope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Gbt,
    ScratchNn,
    TransferredNn,
    PretrainedNn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Gbt => "gbt",
            ModelKind::ScratchNn => "scratch_nn",
            ModelKind::TransferredNn => "transferred_nn",
            ModelKind::PretrainedNn => "pretrained_nn",
        }
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub arm: String,
    pub model_kind: ModelKind,
    pub features: FeatureSet,
    pub train_fraction: f64,
    pub seed: u64,
    pub rmse_mv: f64,
    pub per_pattern_rmse_mv: Vec<f64>,
    pub runtime_secs: f64,
}

impl ExperimentResult {
    fn new(kind: ModelKind, cfg: &RunConfig, features: FeatureSet, rmse: RmseSummary, started: Instant) -> Self {
        Self {
            arm: arm_name(kind, features),
            model_kind: kind,
            features,
            train_fraction: cfg.train_fraction,
            seed: cfg.seed(),
            rmse_mv: rmse.aggregate,
            per_pattern_rmse_mv: rmse.per_pattern,
            runtime_secs: started.elapsed().as_secs_f64(),
        }
    }
}

pub fn arm_name(kind: ModelKind, features: FeatureSet) -> String {
    format!("{}/{}", kind.as_str(), features)
}

/// Report written by the training and fitting commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReport {
    pub command: String,
    pub manifest: PathBuf,
    pub config: RunConfig,
    pub training: Option<TrainReport>,
    pub frozen: Vec<Block>,
    pub result: Option<ExperimentResult>,
}

fn feature_set_of(groups: &GroupSpec) -> FeatureSet {
    if groups.has_kind(GroupKind::Odometer) {
        FeatureSet::PostOdo
    } else {
        FeatureSet::Post
    }
}

pub fn load_manifest_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset(&read_manifest(path)?)
}

fn require_test(summary: Option<RmseSummary>) -> Result<RmseSummary> {
    summary.ok_or_else(|| Error::Argument("test split is empty; lower --train-fraction".into()))
}

/// `<path>.report.json` next to an artifact.
pub fn report_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    artifact.with_file_name(name)
}

fn write_report(artifact: &Path, report: &CommandReport) -> Result<PathBuf> {
    let path = report_path(artifact);
    write_json(&path, report)?;
    Ok(path)
}

/// Generates the synthetic pair and returns the manifests plus a summary.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path) -> Result<(PathBuf, PathBuf, String)> {
    let spec = read_spec(spec_path)?;
    let (b, t) = gen_pair(&spec, out_dir)?;
    Ok((b, t, describe(&spec)))
}

pub fn run_pretrain(dataset: &Dataset, cfg: &RunConfig) -> Result<(Checkpoint, TrainReport, ExperimentResult)> {
    let started = Instant::now();
    let task = cfg.task(dataset, cfg.features)?;
    let mut train = cfg.train.clone();
    train.freeze.clear();
    let (ckpt, report) = pretrain(&task, &cfg.model_config(&task), &train)?;
    let rmse = require_test(task.evaluate(&ckpt.net)?)?;
    let result = ExperimentResult::new(ModelKind::PretrainedNn, cfg, feature_set_of(&task.groups), rmse, started);
    Ok((ckpt, report, result))
}

pub fn cmd_pretrain(manifest: &Path, cfg: &RunConfig, out_ckpt: &Path) -> Result<CommandReport> {
    let dataset = load_manifest_dataset(manifest)?;
    let (ckpt, training, result) = run_pretrain(&dataset, cfg)?;
    save_checkpoint_file(&ckpt, out_ckpt)?;
    let report = CommandReport {
        command: "pretrain".into(),
        manifest: manifest.to_path_buf(),
        config: cfg.clone(),
        frozen: Vec::new(),
        training: Some(training),
        result: Some(result),
    };
    write_report(out_ckpt, &report)?;
    Ok(report)
}

/// Transplants the base trunk into a target network and fine-tunes it.
pub fn run_transfer(
    base: &Checkpoint,
    dataset: &Dataset,
    cfg: &RunConfig,
    features: FeatureSet,
) -> Result<(Checkpoint, TrainReport, ExperimentResult)> {
    let started = Instant::now();
    let task = cfg.task(dataset, features)?;
    let net = transplant(base, &cfg.model_config(&task), cfg.seed())?;
    let (ckpt, report) = finetune(net, &task, &cfg.train)?;
    let rmse = require_test(task.evaluate(&ckpt.net)?)?;
    let result = ExperimentResult::new(ModelKind::TransferredNn, cfg, features, rmse, started);
    Ok((ckpt, report, result))
}

/// Trains the target architecture from a fresh initialization.
pub fn run_scratch(
    dataset: &Dataset,
    cfg: &RunConfig,
    features: FeatureSet,
) -> Result<(Checkpoint, TrainReport, ExperimentResult)> {
    let started = Instant::now();
    let task = cfg.task(dataset, features)?;
    let mut train = cfg.train.clone();
    train.freeze.clear();
    train.lambda = 0.0;
    let (ckpt, report) = pretrain(&task, &cfg.model_config(&task), &train)?;
    let rmse = require_test(task.evaluate(&ckpt.net)?)?;
    let result = ExperimentResult::new(ModelKind::ScratchNn, cfg, features, rmse, started);
    Ok((ckpt, report, result))
}

pub fn cmd_transfer(base_ckpt: &Path, manifest: &Path, cfg: &RunConfig, out_ckpt: &Path) -> Result<CommandReport> {
    let base = load_checkpoint_file(base_ckpt)?;
    let dataset = load_manifest_dataset(manifest)?;
    let (ckpt, training, result) = run_transfer(&base, &dataset, cfg, cfg.features)?;
    save_checkpoint_file(&ckpt, out_ckpt)?;
    let report = CommandReport {
        command: "transfer".into(),
        manifest: manifest.to_path_buf(),
        config: cfg.clone(),
        frozen: training.frozen_blocks.clone(),
        training: Some(training),
        result: Some(result),
    };
    write_report(out_ckpt, &report)?;
    Ok(report)
}

pub fn run_baseline(
    dataset: &Dataset,
    kind: BaselineKind,
    cfg: &RunConfig,
    features: FeatureSet,
) -> Result<(BaselineModel, ExperimentResult)> {
    let started = Instant::now();
    let task = cfg.task(dataset, features)?;
    let bcfg = match kind {
        BaselineKind::Linear => BaselineConfig::linear(cfg.cfs_k),
        BaselineKind::Gbt => BaselineConfig::gbt(cfg.gbt),
    };
    let model = BaselineModel::fit(&task, &bcfg)?;
    let rmse = require_test(model.evaluate(&task.test)?)?;
    let mk = match kind {
        BaselineKind::Linear => ModelKind::Linear,
        BaselineKind::Gbt => ModelKind::Gbt,
    };
    Ok((model, ExperimentResult::new(mk, cfg, features, rmse, started)))
}

pub fn cmd_baseline(manifest: &Path, kind: BaselineKind, cfg: &RunConfig, out: &Path) -> Result<CommandReport> {
    let dataset = load_manifest_dataset(manifest)?;
    let (model, result) = run_baseline(&dataset, kind, cfg, cfg.features)?;
    write_json(out, &model)?;
    let report = CommandReport {
        command: "baseline".into(),
        manifest: manifest.to_path_buf(),
        config: cfg.clone(),
        training: None,
        frozen: Vec::new(),
        result: Some(result),
    };
    write_report(out, &report)?;
    Ok(report)
}

/// A saved network checkpoint or baseline model.
#[derive(Debug, Clone)]
pub enum Artifact {
    Network(Box<Checkpoint>),
    Baseline(Box<BaselineModel>),
}

pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("format_version").is_some() {
        return Ok(Artifact::Network(Box::new(load_checkpoint_file(path)?)));
    }
    let model: BaselineModel = serde_json::from_value(value).map_err(|e| Error::Document {
        path: path.display().to_string(),
        message: format!("neither a checkpoint nor a baseline model: {e}"),
    })?;
    Ok(Artifact::Baseline(Box::new(model)))
}

/// Held-out RMSE of a stored model. The split is rebuilt from
/// `seed`/`train_fraction`; features are normalized with the artifact's own
/// statistics, which must match the dataset's columns.
pub fn evaluate_artifact(artifact: &Artifact, dataset: &Dataset, seed: u64, train_fraction: f64) -> Result<ExperimentResult> {
    let started = Instant::now();
    let sp = split(dataset.n_rows(), train_fraction, seed)?;
    if sp.test.is_empty() {
        return Err(Error::Argument("test split is empty; lower --train-fraction".into()));
    }
    let (stats, groups, mode) = match artifact {
        Artifact::Network(c) => (&c.norm_stats, &c.group_spec, c.target.mode),
        Artifact::Baseline(b) => (&b.norm_stats, &b.group_spec, b.target_mode),
    };
    let normalized = apply_minmax(&dataset.features, stats)?;
    let layout = groups.resolve(&dataset.features.column_names)?;
    let x = normalized.values.select_rows(&sp.test);
    let truth = mode.apply(&dataset.targets).values.select_rows(&sp.test);
    let features = feature_set_of(groups);
    let (kind, pred) = match artifact {
        Artifact::Network(c) => {
            let scaled = c.net.forward(&x, &layout)?;
            let kind = if !c.metadata.frozen_blocks.is_empty() {
                ModelKind::TransferredNn
            } else if dataset.node_label == NodeLabel::Base {
                ModelKind::PretrainedNn
            } else {
                ModelKind::ScratchNn
            };
            (kind, c.target.scaler.inverse(&scaled))
        }
        Artifact::Baseline(b) => {
            let stacked = x.select_columns(&layout.all_columns());
            let kind = match b.config.kind {
                BaselineKind::Linear => ModelKind::Linear,
                BaselineKind::Gbt => ModelKind::Gbt,
            };
            (kind, b.predict(&stacked)?)
        }
    };
    let rmse = rmse_mv(&pred, &truth)?;
    Ok(ExperimentResult {
        arm: arm_name(kind, features),
        model_kind: kind,
        features,
        train_fraction,
        seed,
        rmse_mv: rmse.aggregate,
        per_pattern_rmse_mv: rmse.per_pattern,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

pub fn write_result(path: &Path, result: &ExperimentResult) -> Result<()> {
    write_json(path, result)
}

pub fn cmd_evaluate(artifact: &Path, manifest: &Path, seed: u64, train_fraction: f64) -> Result<ExperimentResult> {
    let artifact = load_artifact(artifact)?;
    let dataset = load_manifest_dataset(manifest)?;
    evaluate_artifact(&artifact, &dataset, seed, train_fraction)
}

/// One comparison arm of the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub kind: ModelKind,
    pub features: FeatureSet,
}

impl Arm {
    pub const fn new(kind: ModelKind, features: FeatureSet) -> Self {
        Self { kind, features }
    }

    pub fn name(&self) -> String {
        arm_name(self.kind, self.features)
    }
}

/// Linear and transferred network crossed with both feature sets, plus the
/// scratch network and boosted trees on the full feature set.
pub const ABLATION_ARMS: [Arm; 6] = [
    Arm::new(ModelKind::Linear, FeatureSet::Post),
    Arm::new(ModelKind::Linear, FeatureSet::PostOdo),
    Arm::new(ModelKind::TransferredNn, FeatureSet::Post),
    Arm::new(ModelKind::TransferredNn, FeatureSet::PostOdo),
    Arm::new(ModelKind::ScratchNn, FeatureSet::PostOdo),
    Arm::new(ModelKind::Gbt, FeatureSet::PostOdo),
];

pub fn run_arm(arm: Arm, base: &Checkpoint, dataset: &Dataset, cfg: &RunConfig) -> Result<ExperimentResult> {
    Ok(match arm.kind {
        ModelKind::Linear => run_baseline(dataset, BaselineKind::Linear, cfg, arm.features)?.1,
        ModelKind::Gbt => run_baseline(dataset, BaselineKind::Gbt, cfg, arm.features)?.1,
        ModelKind::ScratchNn => run_scratch(dataset, cfg, arm.features)?.2,
        ModelKind::TransferredNn => run_transfer(base, dataset, cfg, arm.features)?.2,
        ModelKind::PretrainedNn => {
            return Err(Error::Argument("the pretrained base model is not an ablation arm".into()))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub mean_rmse_mv: f64,
    pub std_rmse_mv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub base_checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<ExperimentResult>,
    pub summary: Vec<ArmSummary>,
}

/// Mean and sample standard deviation per arm, in first-seen arm order.
pub fn summarize(runs: &[ExperimentResult]) -> Vec<ArmSummary> {
    let mut arms: Vec<String> = Vec::new();
    for r in runs {
        if !arms.contains(&r.arm) {
            arms.push(r.arm.clone());
        }
    }
    arms.into_iter()
        .map(|arm| {
            let v: Vec<f64> = runs.iter().filter(|r| r.arm == arm).map(|r| r.rmse_mv).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ArmSummary {
                arm,
                runs: v.len(),
                mean_rmse_mv: mean,
                std_rmse_mv: var.sqrt(),
            }
        })
        .collect()
}

pub fn format_table(summary: &[ArmSummary]) -> String {
    let width = summary.iter().map(|s| s.arm.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<width$}  {:>4}  {:>18}\n", "arm", "runs", "test RMSE (mV)");
    for s in summary {
        out.push_str(&format!(
            "{:<width$}  {:>4}  {:>9.3} ± {:<6.3}\n",
            s.arm, s.runs, s.mean_rmse_mv, s.std_rmse_mv
        ));
    }
    out
}

pub fn run_ablation(
    base: &Checkpoint,
    dataset: &Dataset,
    cfg: &RunConfig,
    seeds: &[u64],
    arms: &[Arm],
) -> Result<Vec<ExperimentResult>> {
    if seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }
    let mut runs = Vec::with_capacity(seeds.len() * arms.len());
    for &seed in seeds {
        let c = cfg.with_seed(seed);
        for &arm in arms {
            let r = run_arm(arm, base, dataset, &c)?;
            log::info!("seed {seed} {}: {:.3} mV", r.arm, r.rmse_mv);
            runs.push(r);
        }
    }
    Ok(runs)
}

/// Runs every ablation arm for every seed and writes the JSON report to
/// `out` and the human table next to it (`.txt`).
pub fn cmd_ablate(base_ckpt: &Path, manifest: &Path, seeds: &[u64], cfg: &RunConfig, out: &Path) -> Result<AblationReport> {
    let base = load_checkpoint_file(base_ckpt)?;
    let dataset = load_manifest_dataset(manifest)?;
    let runs = run_ablation(&base, &dataset, cfg, seeds, &ABLATION_ARMS)?;
    let report = AblationReport {
        base_checkpoint: base_ckpt.to_path_buf(),
        manifest: manifest.to_path_buf(),
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        summary: summarize(&runs),
        runs,
    };
    write_json(out, &report)?;
    let table = out.with_extension("txt");
    fs::write(&table, format_table(&report.summary)).map_err(|e| Error::io(&table, e))?;
    Ok(report)
}
