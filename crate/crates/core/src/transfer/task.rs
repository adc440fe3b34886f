use serde::{Deserialize, Serialize};

use super::{TargetInfo, TargetMode, TargetScaler};
use crate::dataset::{apply_minmax, fit_minmax, Dataset, GroupSpec, InputLayout, NormScope, NormStats, Split};
use crate::model::VminNet;
use crate::nn::Matrix;
use crate::{Error, Result};

/// Normalized inputs and targets for one side of a split.
#[derive(Debug, Clone)]
pub struct TaskSet {
    pub groups: Vec<Matrix>,
    pub targets_mv: Matrix,
    pub targets_scaled: Matrix,
    pub row_ids: Vec<String>,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.targets_mv.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gathers a row subset of every group input and the scaled targets.
    pub fn batch(&self, rows: &[usize]) -> (Vec<Matrix>, Matrix) {
        (
            self.groups.iter().map(|g| g.select_rows(rows)).collect(),
            self.targets_scaled.select_rows(rows),
        )
    }
}

/// A dataset prepared for network training under one split, feature set and
/// target mode.
#[derive(Debug, Clone)]
pub struct Task {
    pub groups: GroupSpec,
    pub layout: InputLayout,
    pub norm_stats: NormStats,
    pub target: TargetInfo,
    pub train: TaskSet,
    pub test: TaskSet,
}

impl Task {
    pub fn prepare(
        dataset: &Dataset,
        groups: &GroupSpec,
        split: &Split,
        mode: TargetMode,
        scope: NormScope,
    ) -> Result<Self> {
        if split.train.is_empty() {
            return Err(Error::Argument("training split is empty".into()));
        }
        let layout = groups.resolve(&dataset.features.column_names)?;
        let all: Vec<usize> = (0..dataset.n_rows()).collect();
        let fit_rows = match scope {
            NormScope::Train => &split.train,
            NormScope::All => &all,
        };
        let norm_stats = fit_minmax(&dataset.features, fit_rows)?;
        let normalized = apply_minmax(&dataset.features, &norm_stats)?;
        let targets = mode.apply(&dataset.targets);

        let train_mv = targets.values.select_rows(&split.train);
        let scaler = TargetScaler::fit(&train_mv)?;
        let make = |rows: &[usize]| -> TaskSet {
            let x = normalized.values.select_rows(rows);
            let mv = targets.values.select_rows(rows);
            TaskSet {
                groups: layout.columns.iter().map(|c| x.select_columns(c)).collect(),
                targets_scaled: scaler.transform(&mv),
                targets_mv: mv,
                row_ids: rows.iter().map(|&r| dataset.features.row_ids[r].clone()).collect(),
            }
        };
        let train = make(&split.train);
        let test = make(&split.test);
        Ok(Self {
            groups: groups.clone(),
            layout,
            norm_stats,
            target: TargetInfo {
                mode,
                pattern_names: targets.column_names.clone(),
                scaler,
            },
            train,
            test,
        })
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.layout.group_sizes()
    }

    pub fn output_dim(&self) -> usize {
        self.target.pattern_names.len()
    }

    /// Network predictions in millivolts.
    pub fn predict_mv(&self, net: &VminNet, set: &TaskSet) -> Result<Matrix> {
        let scaled = net.forward_groups(&set.groups)?;
        Ok(self.target.scaler.inverse(&scaled))
    }

    /// Test-split RMSE in millivolts; `None` when the test split is empty.
    pub fn evaluate(&self, net: &VminNet) -> Result<Option<RmseSummary>> {
        if self.test.is_empty() {
            return Ok(None);
        }
        rmse_mv(&self.predict_mv(net, &self.test)?, &self.test.targets_mv).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseSummary {
    /// RMSE over every (die, pattern) entry.
    pub aggregate: f64,
    pub per_pattern: Vec<f64>,
}

pub fn rmse_mv(pred: &Matrix, truth: &Matrix) -> Result<RmseSummary> {
    if pred.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let (n, o) = pred.shape();
    if n == 0 || o == 0 {
        return Err(Error::Argument("RMSE of an empty matrix".into()));
    }
    let mut per = vec![0.0; o];
    for r in 0..n {
        for ((acc, p), t) in per.iter_mut().zip(pred.row(r)).zip(truth.row(r)) {
            *acc += (p - t) * (p - t);
        }
    }
    let total: f64 = per.iter().sum();
    Ok(RmseSummary {
        aggregate: (total / (n * o) as f64).sqrt(),
        per_pattern: per.into_iter().map(|s| (s / n as f64).sqrt()).collect(),
    })
}
