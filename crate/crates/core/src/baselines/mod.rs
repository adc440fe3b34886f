//! Classical per-pattern regressors used as comparison arms: correlation
//! feature selection followed by least squares or gradient-boosted trees.
//! Both fit one model per target column on the same normalized inputs the
//! network sees.

mod cfs;
mod gbt;
mod ols;

pub use cfs::{cfs_select, pearson};
pub use gbt::{best_split, gbt_fit, gbt_predict, BestSplit, GbtModel, GbtParams, Node, RegressionTree};
pub use ols::{fit_columns, ols_fit, ols_predict, LinearModel};

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupSpec, NormStats};
use crate::nn::Matrix;
use crate::transfer::{rmse_mv, RmseSummary, Task, TaskSet, TargetMode};
use crate::{Error, Result};

/// Default number of features kept by correlation selection.
pub const DEFAULT_CFS_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Linear,
    Gbt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternModel {
    Linear(LinearModel),
    Gbt {
        /// Selected input columns, in the order the trees index them.
        columns: Vec<usize>,
        model: GbtModel,
    },
}

impl PatternModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self {
            PatternModel::Linear(m) => m.predict(x),
            PatternModel::Gbt { columns, model } => model.predict(&x.select_columns(columns)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub cfs_k: usize,
    pub gbt: GbtParams,
}

impl BaselineConfig {
    pub fn linear(cfs_k: usize) -> Self {
        Self {
            kind: BaselineKind::Linear,
            cfs_k,
            gbt: GbtParams::default(),
        }
    }

    pub fn gbt(params: GbtParams) -> Self {
        Self {
            kind: BaselineKind::Gbt,
            cfs_k: DEFAULT_CFS_K,
            gbt: params,
        }
    }
}

/// A fitted baseline with everything needed to score new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub group_spec: GroupSpec,
    pub norm_stats: NormStats,
    pub target_mode: TargetMode,
    pub pattern_names: Vec<String>,
    pub patterns: Vec<PatternModel>,
}

/// Model-input matrix of a task set: every group's columns side by side.
pub fn stacked_inputs(set: &TaskSet) -> Result<Matrix> {
    Matrix::hstack(&set.groups)
}

impl BaselineModel {
    pub fn fit(task: &Task, config: &BaselineConfig) -> Result<Self> {
        let x = stacked_inputs(&task.train)?;
        let y = &task.train.targets_mv;
        if config.cfs_k == 0 {
            return Err(Error::Selection("at least one feature must be selected".into()));
        }
        let k = config.cfs_k.min(x.cols());
        let mut patterns = Vec::with_capacity(y.cols());
        for p in 0..y.cols() {
            let target = y.column(p);
            let mut cols = cfs_select(&x, &target, k)?;
            let model = match config.kind {
                BaselineKind::Linear => {
                    // Keep the system well posed on tiny training sets.
                    cols.truncate(x.rows().saturating_sub(2).max(1));
                    PatternModel::Linear(fit_columns(&x, &target, &cols)?)
                }
                BaselineKind::Gbt => PatternModel::Gbt {
                    model: gbt_fit(&x.select_columns(&cols), &target, &config.gbt)?,
                    columns: cols,
                },
            };
            patterns.push(model);
        }
        Ok(Self {
            config: config.clone(),
            group_spec: task.groups.clone(),
            norm_stats: task.norm_stats.clone(),
            target_mode: task.target.mode,
            pattern_names: task.target.pattern_names.clone(),
            patterns,
        })
    }

    /// Predictions in millivolts for a stacked, normalized input matrix.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.patterns.len());
        for (p, m) in self.patterns.iter().enumerate() {
            for (r, v) in m.predict(x).into_iter().enumerate() {
                out.set(r, p, v);
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, set: &TaskSet) -> Result<Option<RmseSummary>> {
        if set.is_empty() {
            return Ok(None);
        }
        let pred = self.predict(&stacked_inputs(set)?)?;
        rmse_mv(&pred, &set.targets_mv).map(Some)
    }
}
