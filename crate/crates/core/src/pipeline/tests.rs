use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{CseMethod, FixedPointFormat, NetworkSpec, ScaleShiftParams, TernaryMatrix};

const VGG: &str = include_str!("../../../../networks/vgg7_half.json");

const TINY: &str = r#"{
    "name": "tiny",
    "layers": [
        { "kind": "buffer", "in_width": 8, "in_channels": 1, "kernel": 3 },
        { "kind": "conv", "name": "conv", "in_width": 8, "in_channels": 1, "kernel": 3, "filters": 4 },
        { "kind": "scale_shift", "name": "ss", "in_width": 8, "in_channels": 4, "activation": "relu" },
        { "kind": "max_pool", "in_width": 8, "in_channels": 4, "kernel": 2, "stride": 2 },
        { "kind": "mux", "in_width": 4, "in_channels": 4 },
        { "kind": "dense", "name": "fc", "in_width": 1, "in_channels": 64, "filters": 10 }
    ]
}"#;

fn random_image(net: &NetworkSpec, rng: &mut ChaCha8Rng) -> ImageStream {
    let (w, d) = (net.input_width(), net.input_channels());
    let data = (0..w * w * d).map(|_| rng.random_range(-64..64)).collect();
    ImageStream::new(w, w, d, net.act_format, data).unwrap()
}

#[test]
fn zero_image_gives_zero_scores() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let mut w = NetworkWeights::random(&net, 1).unwrap();
    w.scale_shift.insert(2, ScaleShiftParams { c: vec![1.0; 4], b: vec![0.0; 4], s: 1.0 });
    let img = ImageStream::zeros(8, 8, 1, FixedPointFormat::ACTIVATION);
    let r = simulate(&net, &w, &img).unwrap();
    assert_eq!(r.scores, vec![0; 10]);
    assert_eq!(r.argmax, Some(0));
    assert_eq!(r.saturations, 0);
}

#[test]
fn every_cse_method_gives_the_same_scores() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let w = NetworkWeights::random(&net, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = random_image(&net, &mut rng);
    let runs: Vec<SimResult> = [CseMethod::None, CseMethod::Td, CseMethod::Bu]
        .iter()
        .map(|&m| compile(&net, &w, m).unwrap().simulate(&img).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[0], simulate(&net, &w, &img).unwrap());
}

#[test]
fn conv_outputs_equal_the_matrix_product() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let w = NetworkWeights::random(&net, 5).unwrap();
    let c = compile(&net, &w, CseMethod::Bu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let img = random_image(&net, &mut rng);
    let m = &w.matrices[&1];
    for patch in window_stream(&img, 3) {
        assert_eq!(c.convs[&1].graph.evaluate(&patch), m.apply(&patch));
    }
}

#[test]
fn rejects_mismatched_inputs() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let w = NetworkWeights::random(&net, 1).unwrap();
    assert!(simulate(&net, &w, &ImageStream::zeros(4, 4, 1, FixedPointFormat::ACTIVATION)).is_err());
    assert!(simulate(&net, &w, &ImageStream::zeros(8, 8, 1, FixedPointFormat::SCALE)).is_err());
    let mut bad = w.clone();
    bad.matrices.insert(1, TernaryMatrix::zeros(4, 8).unwrap());
    assert!(compile(&net, &bad, CseMethod::None).is_err());
    let mut missing = w;
    missing.scale_shift.clear();
    assert!(compile(&net, &missing, CseMethod::None).is_err());
}

#[test]
fn three_input_adders_need_full_rate() {
    let text = TINY.replace(
        r#""kernel": 2, "stride": 2 },"#,
        r#""kernel": 2, "stride": 2 },
        { "kind": "conv", "in_width": 4, "in_channels": 4, "kernel": 3, "filters": 4, "arity": 3 },"#,
    );
    let net = NetworkSpec::from_json(&text).unwrap();
    let w = NetworkWeights::random(&net, 1).unwrap();
    assert!(matches!(compile(&net, &w, CseMethod::None), Err(crate::Error::Config(_))));
}

#[test]
fn widening_activations_changes_nothing_without_saturation() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let w = NetworkWeights::random(&net, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let img = random_image(&net, &mut rng);
    let narrow = simulate(&net, &w, &img).unwrap();
    assert_eq!(narrow.saturations, 0);
    let mut wide_net = net.clone();
    wide_net.act_format = FixedPointFormat::new(24, 4).unwrap();
    let wide_img = ImageStream { format: wide_net.act_format, ..img };
    assert_eq!(simulate(&wide_net, &w, &wide_img).unwrap().scores, narrow.scores);
}

#[test]
fn saturation_is_counted() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let mut w = NetworkWeights::random(&net, 1).unwrap();
    w.matrices.insert(1, TernaryMatrix::new(4, 9, vec![1; 36]).unwrap());
    let img = ImageStream::new(8, 8, 1, FixedPointFormat::ACTIVATION, vec![30000; 64]).unwrap();
    assert!(simulate(&net, &w, &img).unwrap().saturations > 0);
}

#[test]
fn vgg_throughput_cascade() {
    let net = NetworkSpec::from_json(VGG).unwrap();
    let report = throughput_model(&net, &BTreeMap::new());
    assert_eq!(report.frames_per_sec, 122_070);
    let cascade: Vec<(u64, u64)> = report.cascade().iter().map(|r| (r.values, r.cycles)).collect();
    assert_eq!(cascade, vec![(3, 1), (64, 1), (64, 4), (128, 4), (128, 16), (256, 16), (256, 64), (4, 1)]);
    let digits: Vec<u32> = report.layers.iter().filter_map(|l| l.schedule.map(|s| s.digits)).collect();
    assert_eq!(digits, vec![1, 1, 4, 4, 16, 16]);
    let dense = report.layers.iter().find(|l| l.label == "dense").unwrap();
    assert_eq!(dense.lanes, Some(4));
    assert!(report.fifo_high_water.values().all(|&v| v >= 256));
    let text = report.to_text();
    assert!(text.contains("122070 frames/sec"));
    assert!(text.contains("256 values every 64 cycles"));
}

#[test]
fn doubling_width_quarters_the_frame_rate() {
    assert_eq!(frames_per_sec(125e6, 32), 122_070);
    assert_eq!(frames_per_sec(125e6, 64), 30_517);
    assert_eq!(frames_per_sec(1024e6, 32) / 4, frames_per_sec(1024e6, 64));
}

#[test]
fn vgg_op_counts() {
    let net = NetworkSpec::from_json(VGG).unwrap();
    let table = op_count(&net, None, &BTreeMap::new());
    let dense: Vec<u64> = table.rows.iter().map(|r| r.dense_macs).collect();
    assert_eq!(dense, vec![1_769_472, 37_748_736, 18_874_368, 37_748_736, 18_874_368, 37_748_736, 524_288, 1_280]);
    assert_eq!(table.rows[0].formula, "32*32*3*3*3*64");
    assert_eq!(table.total_dense(), 153_289_984);
    assert_eq!(table.total_sparse(), None);
}

#[test]
fn sparsity_and_cse_columns() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let mut w = NetworkWeights::random(&net, 4).unwrap();
    w.matrices.insert(1, TernaryMatrix::zeros(4, 9).unwrap());
    let c = compile(&net, &w, CseMethod::Bu).unwrap();
    let costs = c.convs.iter().map(|(&i, e)| (i, e.cost)).collect();
    let table = op_count(&net, Some(&w), &costs);
    assert_eq!(table.rows[0].sparse_macs, Some(0));
    assert_eq!(table.rows[0].cse_ops, Some(0));
    assert_eq!(table.rows[1].sparse_macs, Some(w.matrices[&5].nonzeros() as u64));
    assert_eq!(table.rows[1].cse_ops, Some(2 * 640));
}

#[test]
fn weights_round_trip_through_files() {
    let net = NetworkSpec::from_json(TINY).unwrap();
    let w = NetworkWeights::random(&net, 7).unwrap();
    let dir = std::env::temp_dir().join(format!("ternroll-weights-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (name, text) in w.files(&net) {
        std::fs::write(dir.join(name), text).unwrap();
    }
    let back = NetworkWeights::load(&dir, &net).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back, w);
}
