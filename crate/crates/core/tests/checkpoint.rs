mod common;

use vmin_core::checkpoint::{load_checkpoint, load_checkpoint_file, save_checkpoint, save_checkpoint_file, Checkpoint};
use vmin_core::dataset::{split, NodeLabel, NormScope};
use vmin_core::synth::generate;
use vmin_core::transfer::{pretrain, TargetMode, Task, TrainConfig};
use vmin_core::Error;

fn trained_checkpoint() -> Checkpoint {
    let pair = generate(&common::small_spec()).unwrap();
    let ds = pair.base;
    assert_eq!(ds.node_label, NodeLabel::Base);
    let sp = split(ds.n_rows(), 0.75, 0).unwrap();
    let task = Task::prepare(&ds, &ds.groups, &sp, TargetMode::Multi, NormScope::Train).unwrap();
    let cfg = common::small_arch().config(task.group_sizes(), task.output_dim());
    let train = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    pretrain(&task, &cfg, &train).unwrap().0
}

fn to_bytes(c: &Checkpoint) -> Vec<u8> {
    let mut buf = Vec::new();
    save_checkpoint(c, &mut buf).unwrap();
    buf
}

fn edit(c: &Checkpoint, f: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let mut v: serde_json::Value = serde_json::from_slice(&to_bytes(c)).unwrap();
    f(&mut v);
    serde_json::to_vec(&v).unwrap()
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let c = trained_checkpoint();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/base.json");
    save_checkpoint_file(&c, &path).unwrap();
    let back = load_checkpoint_file(&path).unwrap();
    assert_eq!(back, c);
    let bits = |c: &Checkpoint| c.net.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&c));
    assert_eq!(to_bytes(&back), to_bytes(&c));
}

#[test]
fn unknown_format_version_is_rejected() {
    let c = trained_checkpoint();
    let bytes = edit(&c, |v| v["format_version"] = 999.into());
    match load_checkpoint(bytes.as_slice()).unwrap_err() {
        Error::FormatVersion { found, expected } => assert_eq!((found, expected), (999, 1)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn edited_hidden_shape_names_the_block() {
    let c = trained_checkpoint();
    let bytes = edit(&c, |v| {
        let block = v["blocks"]
            .as_array_mut()
            .unwrap()
            .iter_mut()
            .find(|b| b["name"] == "hidden_1")
            .unwrap();
        block["weight_shape"] = serde_json::json!([5, 10]);
    });
    match load_checkpoint(bytes.as_slice()).unwrap_err() {
        Error::Integrity { block, .. } => assert_eq!(block, "hidden_1"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn dropped_weight_value_is_an_integrity_error() {
    let c = trained_checkpoint();
    let bytes = edit(&c, |v| {
        v["blocks"][0]["weight"].as_array_mut().unwrap().pop();
    });
    assert!(matches!(load_checkpoint(bytes.as_slice()).unwrap_err(), Error::Integrity { .. }));
}

#[test]
fn truncated_document_is_reported() {
    let c = trained_checkpoint();
    let bytes = to_bytes(&c);
    let err = load_checkpoint(&bytes[..bytes.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Document { .. }), "{err:?}");
    assert_eq!(err.exit_code(), 2);
}
