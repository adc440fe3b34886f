mod common;

use common::{check_net, random_groups, random_matrix, rng};
use vmin_core::model::{Architecture, ModelConfig, VminNet};
use vmin_core::nn::{
    grad_check, mse_loss, Activation, AdamConfig, AdamState, DenseLayer, Evaluation, Matrix, SlotUpdate,
};
use vmin_core::transfer::l2_to_base;

const H: f64 = 1e-6;

fn dense_loss(layer: &DenseLayer, x: &Matrix, up: &Matrix) -> f64 {
    // Linear functional <up, f(x)> so the upstream gradient is exactly `up`.
    let y = layer.forward(x).unwrap();
    y.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum()
}

#[test]
fn dense_weight_bias_and_input_gradients_match_central_differences() {
    for (seed, act) in [(1, Activation::Identity), (2, Activation::leaky(0.01)), (3, Activation::leaky(0.3))] {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, 5, 4, 1.0);
        let up = random_matrix(&mut r, 5, 3, 1.0);
        let layer = DenseLayer::new(random_matrix(&mut r, 3, 4, 1.0), vec![0.1, -0.2, 0.3], act).unwrap();
        let g = layer.backward(&x, &up).unwrap();

        let mut theta: Vec<f64> = layer.weight().as_slice().to_vec();
        theta.extend_from_slice(layer.bias());
        let mut analytic = g.weight.as_slice().to_vec();
        analytic.extend_from_slice(&g.bias);
        let rep = grad_check(&theta, &analytic, H, |p| {
            let l = DenseLayer::new(Matrix::from_vec(3, 4, p[..12].to_vec()).unwrap(), p[12..].to_vec(), act).unwrap();
            let pre = l.pre_activation(&x).unwrap();
            Evaluation {
                loss: dense_loss(&l, &x, &up),
                kink_pattern: Some(pre.as_slice().iter().map(|&z| z >= 0.0).collect()),
            }
        })
        .unwrap();
        assert!(rep.max_relative_error < 1e-7, "{act:?} params {rep:?}");

        let dx = g.input.expect("input gradient");
        let rep = grad_check(x.as_slice(), dx.as_slice(), H, |p| {
            let xp = Matrix::from_vec(5, 4, p.to_vec()).unwrap();
            let pre = layer.pre_activation(&xp).unwrap();
            Evaluation {
                loss: dense_loss(&layer, &xp, &up),
                kink_pattern: Some(pre.as_slice().iter().map(|&z| z >= 0.0).collect()),
            }
        })
        .unwrap();
        assert!(rep.max_relative_error < 1e-7, "{act:?} input {rep:?}");
    }
}

#[test]
fn mse_gradient_matches_central_differences() {
    let mut r = rng(4);
    let pred = random_matrix(&mut r, 6, 3, 2.0);
    let target = random_matrix(&mut r, 6, 3, 2.0);
    let (_, g) = mse_loss(&pred, &target).unwrap();
    let rep = grad_check(pred.as_slice(), g.as_slice(), H, |p| {
        Evaluation::smooth(mse_loss(&Matrix::from_vec(6, 3, p.to_vec()).unwrap(), &target).unwrap().0)
    })
    .unwrap();
    assert!(rep.max_relative_error < 1e-8, "{rep:?}");
}

#[test]
fn small_network_gradient_matches_central_differences() {
    let cfg = ModelConfig {
        group_sizes: vec![3, 2, 4],
        fused_per_group: 2,
        embedding_dim: 5,
        hidden_dims: vec![6, 3, 6],
        output_dim: 4,
        leaky_slope: 0.01,
    };
    for seed in 0..5 {
        let net = VminNet::build(&cfg, seed).unwrap();
        let mut r = rng(100 + seed);
        let groups = random_groups(&mut r, 7, &cfg.group_sizes);
        let target = random_matrix(&mut r, 7, 4, 1.0);
        let rep = check_net(&net, &groups, &target, H);
        assert!(rep.checked > rep.skipped_kinks);
        assert!(rep.max_relative_error < 1e-5, "seed {seed}: {rep:?}");
    }
}

#[test]
fn default_base_network_gradient_matches_central_differences() {
    let cfg = Architecture::default().config(vec![5, 19, 21], 63);
    let net = VminNet::build(&cfg, 11).unwrap();
    let mut r = rng(11);
    let groups = random_groups(&mut r, 3, &cfg.group_sizes);
    let target = random_matrix(&mut r, 3, 63, 1.0);
    let rep = check_net(&net, &groups, &target, H);
    assert!(rep.max_relative_error < 1e-5, "{rep:?}");
}

#[test]
fn total_gradient_with_l2_to_base_matches_central_differences() {
    let cfg = ModelConfig {
        group_sizes: vec![2, 3],
        fused_per_group: 2,
        embedding_dim: 4,
        hidden_dims: vec![5, 3],
        output_dim: 2,
        leaky_slope: 0.01,
    };
    let net = VminNet::build(&cfg, 3).unwrap();
    let mut r = rng(3);
    let groups = random_groups(&mut r, 6, &cfg.group_sizes);
    let target = random_matrix(&mut r, 6, 2, 1.0);
    let lambda = 0.7;

    // Hidden parameters occupy a contiguous slice of the flat vector.
    let shapes = cfg.layer_shapes();
    let sizes: Vec<usize> = shapes.iter().map(|(i, o)| i * o + o).collect();
    let hidden_layers = net.block_layers(vmin_core::model::Block::Hidden);
    let start: usize = sizes[..hidden_layers[0]].iter().sum();
    let end: usize = start + hidden_layers.iter().map(|&l| sizes[l]).sum::<usize>();
    let theta0 = net.to_flat();
    let anchor: Vec<f64> = theta0[start..end].iter().map(|v| v + 0.05).collect();

    let mut analytic = common::net_gradient(&net, &groups, &target);
    let (_, g) = l2_to_base(&theta0[start..end], &anchor, lambda).unwrap();
    for (a, b) in analytic[start..end].iter_mut().zip(&g) {
        *a += b;
    }
    let rep = grad_check(&theta0, &analytic, H, |p| {
        let mut e = common::net_loss(&net, p, &groups, &target);
        e.loss += l2_to_base(&p[start..end], &anchor, lambda).unwrap().0;
        e
    })
    .unwrap();
    assert!(rep.max_relative_error < 1e-6, "{rep:?}");
}

#[test]
fn adam_trajectory_matches_scalar_reference() {
    let cfg = AdamConfig::default();
    let mut state = AdamState::new(cfg, &[2]).unwrap();
    let mut params = vec![0.5, -1.0];
    let (mut m, mut v, mut reference) = ([0.0; 2], [0.0; 2], [0.5, -1.0]);
    for t in 1..=6 {
        let grads: Vec<f64> = params.iter().map(|p| 2.0 * p - 0.3 * t as f64).collect();
        for i in 0..2 {
            let g = 2.0 * reference[i] - 0.3 * t as f64;
            m[i] = 0.9 * m[i] + 0.1 * g;
            v[i] = 0.999 * v[i] + 0.001 * g * g;
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            reference[i] -= 1e-3 * mh / (vh.sqrt() + 1e-8);
        }
        state
            .step(&mut [SlotUpdate {
                slot: 0,
                name: "w",
                params: &mut params,
                grads: &grads,
            }])
            .unwrap();
        for i in 0..2 {
            assert!((params[i] - reference[i]).abs() < 1e-15, "step {t}");
        }
    }
    assert_eq!(state.step_count(), 6);
}
