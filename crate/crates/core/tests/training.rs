mod common;

use std::time::Instant;

use leaflife_core::adversarial::{adversarial_train, epsilon_sweep_with, AdversarialConfig};
use leaflife_core::dataset::{
    load_and_preprocess, scan_dataset, stratified_split, DatasetManifest, SplitAssignment,
    SplitRatios, Subset,
};
use leaflife_core::model::{
    argmax, build_classifier, predict_batch, train, Backbone, ImageClassifier, TrainConfig,
    TrainedModelArtifact, METADATA_FILE, WEIGHTS_FILE,
};
use leaflife_core::Error;

use common::{fixture_root, tiny_config};

fn fixture() -> (DatasetManifest, SplitAssignment) {
    let manifest = scan_dataset(fixture_root()).unwrap();
    let split = stratified_split(&manifest, SplitRatios::PAPER, 42).unwrap();
    (manifest, split)
}

fn subset_images(
    manifest: &DatasetManifest,
    split: &SplitAssignment,
    subset: Subset,
    config: &TrainConfig,
) -> (Vec<leaflife_core::dataset::PreprocessedImage>, Vec<usize>) {
    split
        .subset(manifest, subset)
        .into_iter()
        .map(|(p, l)| {
            (
                load_and_preprocess(manifest.absolute_path(p), config.preprocessing_mode).unwrap(),
                *l,
            )
        })
        .unzip()
}

fn frozen_config() -> TrainConfig {
    let mut c = tiny_config(Backbone::Xception);
    c.freeze_backbone = true;
    c.learning_rate = 5e-2;
    c.max_epochs = 30;
    c.early_stop_patience = 30;
    c
}

#[test]
fn frozen_training_overfits_and_round_trips() {
    let (manifest, split) = fixture();
    let config = frozen_config();
    let started = Instant::now();
    let (artifact, history) = train(build_classifier(&config).unwrap(), &split, &manifest, &config).unwrap();
    eprintln!("frozen training: {:?}, best epoch {}", started.elapsed(), history.best_epoch);

    let (images, labels) = subset_images(&manifest, &split, Subset::Train, &config);
    let probs = predict_batch(&artifact, &images).unwrap();
    let correct = probs
        .rows()
        .into_iter()
        .zip(&labels)
        .filter(|(row, l)| argmax(row.as_slice().unwrap()) == **l)
        .count();
    assert!(correct as f64 / labels.len() as f64 >= 0.99, "{correct}/{} train images", labels.len());

    let (val_images, val_labels) = subset_images(&manifest, &split, Subset::Val, &config);
    let val_probs = predict_batch(&artifact, &val_images).unwrap();
    let val_loss = val_labels
        .iter()
        .enumerate()
        .map(|(i, l)| -(val_probs[[i, *l]] as f64).ln())
        .sum::<f64>()
        / val_labels.len() as f64;
    assert!(
        (val_loss - history.min_val_loss()).abs() < 1e-5,
        "restored weights give {val_loss}, best recorded {}",
        history.min_val_loss()
    );

    let dir = tempfile::tempdir().unwrap();
    artifact.save(dir.path()).unwrap();
    let loaded = TrainedModelArtifact::load(dir.path()).unwrap();
    assert_eq!(loaded.metadata, artifact.metadata);
    assert_eq!(loaded.class_names(), manifest.classes.as_slice());
    let again = predict_batch(&loaded, &images).unwrap();
    let drift = (&again - &probs).mapv(f32::abs).iter().cloned().fold(0.0, f32::max);
    assert!(drift <= 1e-6, "round trip drift {drift}");
    let mean = artifact.metadata.mean_pixel_unit.unwrap();
    assert!((0.0..=1.0).contains(&mean));
}

fn one_epoch_config() -> TrainConfig {
    let mut c = tiny_config(Backbone::Xception);
    c.max_epochs = 1;
    c
}

#[test]
fn same_seed_same_first_epoch() {
    let (manifest, split) = fixture();
    let config = one_epoch_config();
    let run = || train(build_classifier(&config).unwrap(), &split, &manifest, &config).unwrap().1;
    let started = Instant::now();
    let a = run();
    eprintln!("one full epoch: {:?}", started.elapsed());
    let b = run();
    assert!((a.records[0].train_loss - b.records[0].train_loss).abs() < 1e-4);
    assert!((a.records[0].val_loss - b.records[0].val_loss).abs() < 1e-4);
}

#[test]
fn zero_fraction_equals_plain_training() {
    let (manifest, split) = fixture();
    let config = one_epoch_config();
    let plain = train(build_classifier(&config).unwrap(), &split, &manifest, &config).unwrap().1;
    let adv = AdversarialConfig {
        epsilons: vec![0.1],
        adv_fraction: 0.0,
        base_train: config.clone(),
    };
    let (artifact, mixed) = adversarial_train(&split, &manifest, &adv, 0.1).unwrap();
    assert!((plain.records[0].train_loss - mixed.records[0].train_loss).abs() < 1e-4);
    assert!((plain.records[0].val_loss - mixed.records[0].val_loss).abs() < 1e-4);
    assert_eq!(artifact.metadata.adversarial.unwrap().adv_fraction, 0.0);
}

#[test]
fn sweep_rows_are_isolated_and_reproducible() {
    let (manifest, split) = fixture();
    let adv = AdversarialConfig {
        epsilons: vec![0.1, 0.0],
        adv_fraction: 0.5,
        base_train: one_epoch_config(),
    };
    let first_losses = || {
        let seen = std::sync::Mutex::new(Vec::new());
        let rows = epsilon_sweep_with(&split, &manifest, &adv, 1, |eps, _, h| {
            seen.lock().unwrap().push((eps, h.records[0].train_loss));
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), [0.0, 0.1]);
        assert!(rows.iter().all(|r| r.optimal_epochs >= 1 && (0.0..=1.0).contains(&r.val_accuracy)));
        seen.into_inner().unwrap()
    };
    let a = first_losses();
    let b = first_losses();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-4);
    }
    let standalone = adversarial_train(&split, &manifest, &adv, 0.1).unwrap().1;
    let row = a.iter().find(|(e, _)| *e == 0.1).unwrap();
    assert!((row.1 - standalone.records[0].train_loss).abs() < 1e-4);
    let plain = train(build_classifier(&adv.base_train).unwrap(), &split, &manifest, &adv.base_train).unwrap().1;
    let zero = a.iter().find(|(e, _)| *e == 0.0).unwrap();
    assert!((zero.1 - plain.records[0].train_loss).abs() < 1e-4);
}

#[test]
fn corrupted_artifact_names_the_path() {
    let (manifest, split) = fixture();
    let mut config = frozen_config();
    config.max_epochs = 1;
    let (artifact, _) = train(build_classifier(&config).unwrap(), &split, &manifest, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    artifact.save(dir.path()).unwrap();
    let weights = dir.path().join(WEIGHTS_FILE);
    let bytes = std::fs::read(&weights).unwrap();
    std::fs::write(&weights, &bytes[..bytes.len() / 2]).unwrap();
    match TrainedModelArtifact::load(dir.path()) {
        Err(e @ Error::Artifact { .. }) => assert!(e.to_string().contains(WEIGHTS_FILE), "{e}"),
        other => panic!("expected an artifact error, got {other:?}"),
    }
    std::fs::remove_file(dir.path().join(METADATA_FILE)).unwrap();
    assert!(matches!(TrainedModelArtifact::load(dir.path()), Err(Error::Artifact { .. })));
}

#[test]
fn training_preconditions() {
    let (manifest, split) = fixture();
    let mut config = frozen_config();
    config.num_classes = 4;
    let err = train(build_classifier(&config).unwrap(), &split, &manifest, &config).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");

    let config = frozen_config();
    let no_val = stratified_split(&manifest, SplitRatios::new(0.9, 0.0, 0.1), 1).unwrap();
    let err = train(build_classifier(&config).unwrap(), &no_val, &manifest, &config).unwrap_err();
    assert!(matches!(err, Error::InvalidSplit(_)), "{err}");
}
