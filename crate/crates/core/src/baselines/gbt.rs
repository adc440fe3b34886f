//! Gradient-boosted regression trees on squared error with exact greedy
//! splits.

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 5,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::Config("trees, depth and leaf size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!("learning rate {} not in (0, 1]", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A binary tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Reduction in the sum of squared residuals.
    pub gain: f64,
}

/// Exhaustive search for the squared-error split of `rows`. Thresholds are
/// midpoints between consecutive distinct values; both children must keep at
/// least `min_leaf` rows.
pub fn best_split(x: &Matrix, r: &[f64], rows: &[usize], min_leaf: usize) -> Option<BestSplit> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let base = total * total / n as f64;
    let mut best: Option<BestSplit> = None;
    let mut order = rows.to_vec();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left = 0.0;
        for k in 0..n - 1 {
            left += r[order[k]];
            let nl = k + 1;
            let (xa, xb) = (x.get(order[k], f), x.get(order[k + 1], f));
            if nl < min_leaf || n - nl < min_leaf || xa == xb {
                continue;
            }
            let right = total - left;
            let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - base;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (xa + xb),
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    x: &Matrix,
    r: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &GbtParams,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let mean = rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64;
    nodes.push(Node::Leaf { value: mean });
    if depth == params.max_depth {
        return id;
    }
    let scale: f64 = rows.iter().map(|&i| r[i] * r[i]).sum();
    let Some(split) = best_split(x, r, &rows, params.min_leaf) else {
        return id;
    };
    if split.gain <= 1e-12 * scale {
        return id;
    }
    let (lrows, rrows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&i| x.get(i, split.feature) <= split.threshold);
    let left = grow(x, r, lrows, depth + 1, params, nodes);
    let right = grow(x, r, rrows, depth + 1, params, nodes);
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub init: f64,
    pub trees: Vec<RegressionTree>,
    /// Training RMSE after 0, 1, ..., n_trees stages.
    pub train_rmse: Vec<f64>,
}

impl GbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init
            + self.params.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}

fn rmse(residual: &[f64]) -> f64 {
    (residual.iter().map(|v| v * v).sum::<f64>() / residual.len() as f64).sqrt()
}

pub fn gbt_fit(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    if x.rows() != y.len() || y.is_empty() {
        return Err(Error::Dimension(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    let init = y.iter().sum::<f64>() / y.len() as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - init).collect();
    let mut train_rmse = vec![rmse(&residual)];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut nodes = Vec::new();
        grow(x, &residual, (0..y.len()).collect(), 0, params, &mut nodes);
        let tree = RegressionTree { nodes };
        for (i, res) in residual.iter_mut().enumerate() {
            *res -= params.learning_rate * tree.predict_row(x.row(i));
        }
        train_rmse.push(rmse(&residual));
        trees.push(tree);
    }
    Ok(GbtModel {
        params: *params,
        init,
        trees,
        train_rmse,
    })
}

pub fn gbt_predict(model: &GbtModel, x: &Matrix) -> Vec<f64> {
    model.predict(x)
}
