#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use leaflife_core::dataset::DatasetManifest;
use leaflife_core::model::{Backbone, TrainConfig};

pub fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/leaves")
}

pub const FIXTURE_CLASSES: [&str; 3] = ["Black Rot", "Healthy", "Isariopsis Leaf Spot"];

/// In-memory manifest with `counts[i]` files in class `i`.
pub fn synthetic_manifest(counts: &[usize]) -> DatasetManifest {
    let classes: Vec<String> = (0..counts.len()).map(|i| format!("class_{i:02}")).collect();
    let mut entries = Vec::new();
    let mut per_class = BTreeMap::new();
    for (label, (&n, name)) in counts.iter().zip(&classes).enumerate() {
        for j in 0..n {
            entries.push((format!("{name}/img_{j:04}.png"), label));
        }
        per_class.insert(name.clone(), n);
    }
    entries.sort();
    DatasetManifest {
        root_path: PathBuf::from("/nonexistent"),
        classes,
        total: entries.len(),
        entries,
        counts: per_class,
        skipped_files: 0,
    }
}

/// Desk-scale config for the 3-class fixture.
pub fn tiny_config(backbone: Backbone) -> TrainConfig {
    let mut c = TrainConfig::reference(backbone);
    c.num_classes = 3;
    c.width_multiplier = 1.0 / 16.0;
    c.batch_size = 8;
    c.max_epochs = 3;
    c.early_stop_patience = 5;
    c
}
