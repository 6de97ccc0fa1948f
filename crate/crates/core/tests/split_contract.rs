mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use leaflife_core::dataset::{scan_dataset, stratified_split, SplitRatios, Subset};
use leaflife_core::Error;
use proptest::prelude::*;

use common::{fixture_root, synthetic_manifest, FIXTURE_CLASSES};

fn count_images(dir: &Path) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            n += count_images(&path);
        } else if matches!(
            path.extension().and_then(|e| e.to_str()).map(str::to_lowercase).as_deref(),
            Some("png" | "jpg" | "jpeg")
        ) {
            n += 1;
        }
    }
    n
}

#[test]
fn fixture_scan_matches_directory_walk() {
    let root = fixture_root();
    let manifest = scan_dataset(&root).unwrap();
    assert_eq!(manifest.classes, FIXTURE_CLASSES);
    assert_eq!(manifest.total, count_images(&root));
    assert_eq!(manifest.total, 30);
    for class in FIXTURE_CLASSES {
        assert_eq!(manifest.counts[class], count_images(&root.join(class)));
        assert_eq!(manifest.counts[class], 10);
    }
}

#[test]
fn fixture_split_sizes() {
    let manifest = scan_dataset(fixture_root()).unwrap();
    let split = stratified_split(&manifest, SplitRatios::PAPER, 42).unwrap();
    assert_eq!(split.count(Subset::Train), 21);
    assert_eq!(split.count(Subset::Val), 6);
    assert_eq!(split.count(Subset::Test), 3);
}

#[test]
fn missing_root_is_not_found() {
    assert!(matches!(
        scan_dataset(fixture_root().join("absent")),
        Err(Error::NotFound(_))
    ));
}

#[test]
fn invalid_ratios_rejected() {
    let manifest = synthetic_manifest(&[5, 5]);
    assert!(matches!(
        stratified_split(&manifest, SplitRatios::new(0.5, 0.4, 0.2), 1),
        Err(Error::InvalidRatios(_))
    ));
}

fn ratios() -> impl Strategy<Value = SplitRatios> {
    (1u32..=80, 0u32..=60).prop_filter_map("sums to 100", |(a, b)| {
        (a + b <= 100).then(|| SplitRatios::new(a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn split_contract(
        counts in prop::collection::vec(0usize..40, 1..6).prop_filter("non-empty", |c| c.iter().sum::<usize>() > 0),
        seed in any::<u64>(),
        ratios in ratios(),
    ) {
        let manifest = synthetic_manifest(&counts);
        let split = stratified_split(&manifest, ratios, seed).unwrap();

        let all: BTreeSet<&str> = manifest.entries.iter().map(|(p, _)| p.as_str()).collect();
        let assigned: BTreeSet<&str> = split.assignment.keys().map(String::as_str).collect();
        prop_assert_eq!(&all, &assigned);

        let mut seen = BTreeSet::new();
        let mut per_class: BTreeMap<(usize, Subset), usize> = BTreeMap::new();
        for subset in [Subset::Train, Subset::Val, Subset::Test] {
            for (path, label) in split.subset(&manifest, subset) {
                prop_assert!(seen.insert(path.clone()), "{} in two subsets", path);
                *per_class.entry((*label, subset)).or_default() += 1;
            }
        }
        prop_assert_eq!(seen.len(), manifest.total);

        for (label, &n) in counts.iter().enumerate() {
            for (k, subset) in [Subset::Train, Subset::Val, Subset::Test].into_iter().enumerate() {
                let got = per_class.get(&(label, subset)).copied().unwrap_or(0) as f64;
                let want = ratios.0[k] * n as f64;
                prop_assert!((got - want).abs() <= 1.0 + 1e-9, "class {} {:?}: {} vs {}", label, subset, got, want);
            }
        }

        let again = stratified_split(&manifest, ratios, seed).unwrap();
        prop_assert_eq!(split.to_json().unwrap(), again.to_json().unwrap());
    }
}
