#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use vmin_core::model::{flatten_grads, VminNet};
use vmin_core::nn::{grad_check, mse_loss, Evaluation, GradCheckReport, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Random group inputs in [0, 1], as the network sees after normalization.
pub fn random_groups(rng: &mut ChaCha8Rng, rows: usize, sizes: &[usize]) -> Vec<Matrix> {
    sizes
        .iter()
        .map(|&m| Matrix::from_vec(rows, m, (0..rows * m).map(|_| rng.gen::<f64>()).collect()).unwrap())
        .collect()
}

/// MSE loss of `net` at flat parameters `theta`, with the kink pattern.
pub fn net_loss(net: &VminNet, theta: &[f64], groups: &[Matrix], target: &Matrix) -> Evaluation {
    let mut probe = net.clone();
    probe.set_flat(theta).unwrap();
    let (out, trace) = probe.forward_trace(groups).unwrap();
    Evaluation {
        loss: mse_loss(&out, target).unwrap().0,
        kink_pattern: Some(trace.kink_pattern(&probe)),
    }
}

/// Analytic MSE gradient of `net`, flattened like `to_flat`.
pub fn net_gradient(net: &VminNet, groups: &[Matrix], target: &Matrix) -> Vec<f64> {
    let (out, trace) = net.forward_trace(groups).unwrap();
    let (_, d) = mse_loss(&out, target).unwrap();
    flatten_grads(&net.backward(&trace, &d).unwrap())
}

pub fn check_net(net: &VminNet, groups: &[Matrix], target: &Matrix, h: f64) -> GradCheckReport {
    let theta = net.to_flat();
    let analytic = net_gradient(net, groups, target);
    grad_check(&theta, &analytic, h, |p| net_loss(net, p, groups, target)).unwrap()
}

/// A small synthetic pair: fast enough for debug-build training tests.
pub fn small_spec() -> vmin_core::synth::SyntheticSpec {
    let mut spec = vmin_core::synth::SyntheticSpec::default();
    spec.base.n_dies = 160;
    spec.base.n_patterns = 6;
    spec.base.group_sizes = vec![3, 4, 5];
    spec.target.n_dies = 80;
    spec.target.n_patterns = 4;
    spec.target.group_sizes = vec![4, 3, 5];
    spec.target.n_odometers = 6;
    spec.target.temperatures = vec![25, 125];
    spec.base.temperatures = vec![25, 125];
    spec
}

/// Same trunk layout as the default network, narrower.
pub fn small_arch() -> vmin_core::model::Architecture {
    vmin_core::model::Architecture {
        fused_per_group: 2,
        embedding_dim: 8,
        hidden_dims: vec![10, 4, 10],
        leaky_slope: 0.01,
    }
}
