use std::sync::Arc;
use std::time::Instant;

use mrai_core::phantom::{generate_phantom, simulate_scan, AcquisitionProtocol};
use mrai_core::sampling::{build_pairs, extract_patches, PairDataset};
use mrai_core::siamnet::{train, NetConfig, SiameseModel, TrainOptions};

fn two_protocol_pairs(max_pairs: usize) -> PairDataset {
    let map = Arc::new(generate_phantom(21, 128, 128).unwrap());
    let src = simulate_scan(&map, &AcquisitionProtocol::brainweb_1_5t(), 0, 1).unwrap();
    let tgt = simulate_scan(&map, &AcquisitionProtocol::brainweb_3_0t(), 1, 2).unwrap();
    let s = extract_patches(&src, 10, 3, None).unwrap();
    let t = extract_patches(&tgt, 2, 4, None).unwrap();
    build_pairs(&s, &t, max_pairs, 5).unwrap()
}

#[test]
fn zero_epochs_returns_initialization() {
    let ds = two_protocol_pairs(100);
    let opts = TrainOptions { epochs: 0, ..TrainOptions::default() };
    let out = train(NetConfig::default(), &ds, &opts, 9).unwrap();
    let init = SiameseModel::init(NetConfig::default(), mrai_core::seeds::derive(9, "init", &[])).unwrap();
    assert_eq!(out.model, init);
    assert!(out.history.is_empty());
}

#[test]
fn same_seed_same_trajectory() {
    let ds = two_protocol_pairs(200);
    let opts = TrainOptions { epochs: 3, batch_size: 32, ..TrainOptions::default() };
    let a = train(NetConfig::default(), &ds, &opts, 4).unwrap();
    let b = train(NetConfig::default(), &ds, &opts, 4).unwrap();
    assert_eq!(a.model.params, b.model.params);
    let losses = |o: &mrai_core::siamnet::TrainOutcome| o.history.iter().map(|e| e.mean_loss).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
    let c = train(NetConfig::default(), &ds, &opts, 5).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn training_descends_on_phantom_pairs() {
    let ds = two_protocol_pairs(600);
    assert_eq!(ds.len(), 600);
    let opts = TrainOptions { epochs: 100, ..TrainOptions::default() };
    let start = Instant::now();
    let out = train(NetConfig::default(), &ds, &opts, 1).unwrap();
    eprintln!("100 epochs over 600 pairs: {:?}", start.elapsed());
    let first = out.history.first().unwrap().mean_loss;
    let last = out.history.last().unwrap().mean_loss;
    assert!(last < first, "final {last} >= first {first}");
    assert_eq!(out.history.len(), 100);
    assert_eq!(out.steps, 100 * 10);
}
