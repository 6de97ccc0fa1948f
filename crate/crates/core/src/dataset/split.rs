use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Val, Subset::Test];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        })
    }
}

/// `(train, val, test)` fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios(pub [f64; 3]);

impl SplitRatios {
    pub const PAPER: SplitRatios = SplitRatios([0.70, 0.20, 0.10]);

    pub fn new(train: f64, val: f64, test: f64) -> Self {
        Self([train, val, test])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidRatios(format!(
                "{:?} contains a negative or non-finite value",
                self.0
            )));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!(
                "{:?} sums to {sum}, expected 1",
                self.0
            )));
        }
        Ok(())
    }

    /// Per-subset sizes for a class of `n` images: floor of each share, then
    /// the remainder one at a time to train, val, test (skipping zero ratios).
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let mut sizes = self.0.map(|r| (r * n as f64 + 1e-9).floor() as usize);
        let mut remainder = n.saturating_sub(sizes.iter().sum());
        for (size, ratio) in sizes.iter_mut().zip(self.0) {
            if remainder == 0 {
                break;
            }
            if ratio > 0.0 {
                *size += 1;
                remainder -= 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub assignment: BTreeMap<String, Subset>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Seeded per-class shuffle followed by a deterministic cut into train,
/// val and test.
pub fn stratified_split(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<&str>> = vec![Vec::new(); manifest.num_classes()];
    for (path, class) in &manifest.entries {
        by_class[*class].push(path);
    }

    let mut assignment = BTreeMap::new();
    let mut warnings = Vec::new();
    for (class, mut paths) in by_class.into_iter().enumerate() {
        paths.shuffle(&mut rng);
        let sizes = ratios.allocate(paths.len());
        for subset in Subset::ALL {
            if ratios.0[subset.index()] > 0.0 && sizes[subset.index()] == 0 {
                let msg = format!(
                    "class '{}' ({} images) gets no {subset} images",
                    manifest.classes[class],
                    paths.len()
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        let mut cursor = paths.into_iter();
        for subset in Subset::ALL {
            for path in cursor.by_ref().take(sizes[subset.index()]) {
                assignment.insert(path.to_string(), subset);
            }
        }
    }

    Ok(SplitAssignment {
        seed,
        ratios,
        assignment,
        warnings,
    })
}

impl SplitAssignment {
    /// Entries of `subset` in manifest order.
    pub fn subset<'m>(
        &self,
        manifest: &'m DatasetManifest,
        subset: Subset,
    ) -> Vec<&'m (String, usize)> {
        manifest
            .entries
            .iter()
            .filter(|(path, _)| self.assignment.get(path) == Some(&subset))
            .collect()
    }

    pub fn count(&self, subset: Subset) -> usize {
        self.assignment.values().filter(|s| **s == subset).count()
    }

    /// Every manifest entry must be assigned exactly once and nothing else.
    pub fn check_consistent(&self, manifest: &DatasetManifest) -> Result<()> {
        if self.assignment.len() != manifest.entries.len() {
            return Err(Error::InvalidSplit(format!(
                "split covers {} paths but manifest has {}",
                self.assignment.len(),
                manifest.entries.len()
            )));
        }
        if let Some((path, _)) = manifest
            .entries
            .iter()
            .find(|(p, _)| !self.assignment.contains_key(p))
        {
            return Err(Error::InvalidSplit(format!("{path} is not assigned")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        let split: Self = serde_json::from_slice(&bytes)?;
        split.ratios.validate()?;
        Ok(split)
    }
}
