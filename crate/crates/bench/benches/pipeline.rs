use std::collections::BTreeMap;
use std::hint::black_box;
use std::path::PathBuf;

use candle_core::{Device, Tensor};
use criterion::{criterion_group, criterion_main, Criterion};
use leaflife_core::adversarial::fgsm_perturb;
use leaflife_core::dataset::{stratified_split, DatasetManifest, PreprocessedImage, PreprocessingMode, SplitRatios};
use leaflife_core::eval::EvaluationReport;
use leaflife_core::explain::{grad_cam, CamScore, LayerSelector, TargetClass};
use leaflife_core::model::toy::ToyConvNet;
use leaflife_core::model::{build_classifier, one_hot, Backbone, TrainConfig};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grape_sized_manifest() -> DatasetManifest {
    let counts = [1383usize, 1180, 1076, 1423];
    let classes: Vec<String> = ["Black Measles", "Black Rot", "Healthy", "Isariopsis Leaf Spot"]
        .map(String::from)
        .to_vec();
    let mut entries = Vec::new();
    for (label, n) in counts.iter().enumerate() {
        for j in 0..*n {
            entries.push((format!("{}/{j:05}.jpg", classes[label]), label));
        }
    }
    entries.sort();
    DatasetManifest {
        root_path: PathBuf::from("grape"),
        counts: classes.iter().cloned().zip(counts).collect::<BTreeMap<_, _>>(),
        total: entries.len(),
        classes,
        entries,
        skipped_files: 0,
    }
}

fn bench_split(c: &mut Criterion) {
    let manifest = grape_sized_manifest();
    c.bench_function("stratified_split_5k", |b| {
        b.iter(|| stratified_split(black_box(&manifest), SplitRatios::PAPER, 42).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let names: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
    let y_true: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..4)).collect();
    let y_pred: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..4)).collect();
    c.bench_function("report_10k", |b| {
        b.iter(|| EvaluationReport::from_predictions("m", &names, black_box(&y_true), &y_pred).unwrap())
    });
}

fn tiny_xception() -> leaflife_core::model::Network {
    let mut config = TrainConfig::reference(Backbone::Xception);
    config.num_classes = 4;
    config.width_multiplier = 1.0 / 16.0;
    build_classifier(&config).unwrap()
}

fn bench_fgsm(c: &mut Criterion) {
    let net = tiny_xception();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f32> = (0..2 * 3 * 224 * 224).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::from_vec(x, (2, 3, 224, 224), &Device::Cpu).unwrap();
    let y = one_hot(&[0, 3], 4).unwrap();
    let mut group = c.benchmark_group("fgsm");
    group.sample_size(10);
    group.bench_function("tiny_xception_batch2", |b| b.iter(|| fgsm_perturb(&net, &x, &y, 0.1).unwrap()));
    group.finish();
}

fn bench_grad_cam(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mode = PreprocessingMode::ScaleSymmetric;
    let image = PreprocessedImage::from_array(Array3::from_shape_fn((224, 224, 3), |_| rng.gen_range(-1.0..1.0)), mode);
    let toy = ToyConvNet::new(vec![0.5; 24], vec![0.1; 32], vec![0.0; 4], mode).unwrap();
    c.bench_function("grad_cam_toy_224", |b| {
        b.iter(|| grad_cam(&toy, &image, TargetClass::Auto, &LayerSelector::LastConv, CamScore::Logit).unwrap())
    });
    let net = tiny_xception();
    let mut group = c.benchmark_group("grad_cam");
    group.sample_size(10);
    group.bench_function("tiny_xception_224", |b| {
        b.iter(|| grad_cam(&net, &image, TargetClass::Auto, &LayerSelector::LastConv, CamScore::Logit).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_split, bench_metrics, bench_fgsm, bench_grad_cam);
criterion_main!(benches);
