mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use vmin_core::checkpoint::Checkpoint;
use vmin_core::dataset::{split, Dataset, NormScope};
use vmin_core::model::{Block, ModelConfig, VminNet};
use vmin_core::synth::{generate, SyntheticPair};
use vmin_core::transfer::{finetune, pretrain, transplant, TargetMode, Task, TrainConfig};
use vmin_core::Error;

struct Fixture {
    pair: SyntheticPair,
    base: Checkpoint,
    target_task: Task,
}

fn task(ds: &Dataset, fraction: f64, seed: u64) -> Task {
    let sp = split(ds.n_rows(), fraction, seed).unwrap();
    Task::prepare(ds, &ds.groups, &sp, TargetMode::Multi, NormScope::Train).unwrap()
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let pair = generate(&common::small_spec()).unwrap();
        let base_task = task(&pair.base, 0.75, 0);
        let cfg = common::small_arch().config(base_task.group_sizes(), base_task.output_dim());
        let train = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let base = pretrain(&base_task, &cfg, &train).unwrap().0;
        let target_task = task(&pair.target, 0.5, 1);
        Fixture {
            pair,
            base,
            target_task,
        }
    })
}

fn target_config(f: &Fixture) -> ModelConfig {
    ModelConfig {
        group_sizes: f.target_task.group_sizes(),
        output_dim: f.target_task.output_dim(),
        ..f.base.model_config().clone()
    }
}

fn hidden_params(net: &VminNet) -> Vec<f64> {
    net.block_layers(Block::Hidden)
        .into_iter()
        .flat_map(|i| {
            let l = &net.layers()[i];
            l.weight().as_slice().iter().chain(l.bias()).copied().collect::<Vec<_>>()
        })
        .collect()
}

fn finetuned(freeze: BTreeSet<Block>, lambda: f64, epochs: usize) -> (VminNet, VminNet) {
    let f = fixture();
    let start = transplant(&f.base, &target_config(f), 3).unwrap();
    let cfg = TrainConfig {
        epochs,
        freeze,
        lambda,
        seed: 3,
        ..TrainConfig::default()
    };
    let (ckpt, _) = finetune(start.clone(), &f.target_task, &cfg).unwrap();
    (start, ckpt.net)
}

#[test]
fn transplant_copies_hidden_layers_exactly() {
    let f = fixture();
    let net = transplant(&f.base, &target_config(f), 11).unwrap();
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(hidden_params(&net)), bits(hidden_params(&f.base.net)));
    // Non-hidden blocks come from the target's own initialization.
    let fresh = VminNet::build(&target_config(f), 11).unwrap();
    for block in [Block::Fusion, Block::Embedding, Block::Output] {
        for i in net.block_layers(block) {
            assert_eq!(net.layers()[i], fresh.layers()[i]);
        }
    }
    // Repeating the transplant changes nothing.
    let mut wrapped = f.base.clone();
    wrapped.net = net.clone();
    assert_eq!(
        hidden_params(&transplant(&wrapped, &target_config(f), 11).unwrap()),
        hidden_params(&net)
    );
}

#[test]
fn mismatched_hidden_stack_is_a_transfer_error() {
    let f = fixture();
    let mut cfg = target_config(f);
    cfg.hidden_dims = vec![10, 5, 10];
    let err = transplant(&f.base, &cfg, 0).unwrap_err();
    assert!(matches!(err, Error::Transfer(_)), "{err:?}");
    assert_eq!(err.exit_code(), 4);

    let mut cfg = target_config(f);
    cfg.embedding_dim += 1;
    assert!(matches!(transplant(&f.base, &cfg, 0), Err(Error::Transfer(_))));
}

#[test]
fn frozen_hidden_block_is_bit_identical_after_finetune() {
    let (start, end) = finetuned([Block::Hidden].into(), 0.0, 30);
    assert_eq!(
        hidden_params(&start).iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        hidden_params(&end).iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    for block in [Block::Fusion, Block::Embedding, Block::Output] {
        for i in start.block_layers(block) {
            assert_ne!(start.layers()[i], end.layers()[i], "{block:?} layer {i} never moved");
        }
    }
}

#[test]
fn unfrozen_hidden_block_moves() {
    let (start, end) = finetuned(BTreeSet::new(), 0.0, 30);
    assert_ne!(hidden_params(&start), hidden_params(&end));
}

fn max_abs_drift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn strong_anchor_approaches_hard_freeze() {
    let (start, free) = finetuned(BTreeSet::new(), 0.0, 30);
    let (_, anchored) = finetuned(BTreeSet::new(), 1e6, 30);
    let base = hidden_params(&start);
    let free_drift = max_abs_drift(&base, &hidden_params(&free));
    let anchored_drift = max_abs_drift(&base, &hidden_params(&anchored));
    println!("hidden drift: free {free_drift:.3e}, anchored {anchored_drift:.3e}");
    let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(anchored_drift < 1e-3 * scale, "{anchored_drift} vs scale {scale}");
    assert!(anchored_drift < 0.25 * free_drift);
}

#[test]
fn pretraining_reduces_training_loss() {
    let f = fixture();
    let base_task = task(&f.pair.base, 0.75, 0);
    let cfg = common::small_arch().config(base_task.group_sizes(), base_task.output_dim());
    let (_, report) = pretrain(
        &base_task,
        &cfg,
        &TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(
        report.final_train_loss() < 0.5 * report.initial_train_loss,
        "{} -> {}",
        report.initial_train_loss,
        report.final_train_loss()
    );
}

#[test]
fn full_batch_takes_one_step_per_epoch() {
    let f = fixture();
    let n = f.target_task.train.len();
    let cfg = TrainConfig {
        epochs: 7,
        batch_size: n,
        ..TrainConfig::frozen_hidden()
    };
    let net = transplant(&f.base, &target_config(f), 0).unwrap();
    let (_, report) = finetune(net, &f.target_task, &cfg).unwrap();
    assert_eq!(report.adam_steps, 7);

    let cfg = TrainConfig { batch_size: 7, ..cfg };
    let net = transplant(&f.base, &target_config(f), 0).unwrap();
    let (_, report) = finetune(net, &f.target_task, &cfg).unwrap();
    assert_eq!(report.adam_steps, 7 * n.div_ceil(7) as u64);
}

#[test]
fn training_is_deterministic() {
    let a = finetuned([Block::Hidden].into(), 0.0, 20).1;
    let b = finetuned([Block::Hidden].into(), 0.0, 20).1;
    assert_eq!(a, b);
}

#[test]
fn finetuning_improves_held_out_rmse() {
    let f = fixture();
    let net = transplant(&f.base, &target_config(f), 0).unwrap();
    let (_, report) = finetune(
        net,
        &f.target_task,
        &TrainConfig {
            epochs: 300,
            ..TrainConfig::frozen_hidden()
        },
    )
    .unwrap();
    let before = report.initial_test_rmse.unwrap();
    let after = report.final_test.unwrap().aggregate;
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn task_must_fit_the_network() {
    let f = fixture();
    let mut cfg = target_config(f);
    cfg.output_dim += 1;
    let net = transplant(&f.base, &cfg, 0).unwrap();
    let err = finetune(net, &f.target_task, &TrainConfig::frozen_hidden()).unwrap_err();
    assert!(matches!(err, Error::Schema(_)));
}
