use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// Inventory of a class-per-folder image corpus.
///
/// Classes are kept in alphabetical order and entries are sorted by class,
/// then by file name, so two scans of the same tree serialize identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root_path: PathBuf,
    pub classes: Vec<String>,
    /// `(relative_path, class_index)`; paths use `/` separators.
    pub entries: Vec<(String, usize)>,
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
    /// Files found in class folders that were not recognized as images.
    #[serde(default)]
    pub skipped_files: usize,
}

pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
        .unwrap_or(false)
}

/// Walks `root/<ClassName>/<image>` and builds the manifest.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::NotFound(root.to_path_buf()));
    }

    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !entry.file_type()?.is_dir() {
            continue;
        }
        class_dirs.push((name, entry.path()));
    }
    if class_dirs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} contains no class directories",
            root.display()
        )));
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut entries = Vec::new();
    let mut counts = BTreeMap::new();
    let mut skipped_files = 0;
    for (index, (class, dir)) in class_dirs.into_iter().enumerate() {
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let path = entry.path();
            if is_image_file(&path) {
                files.push(entry.file_name().to_string_lossy().into_owned());
            } else {
                skipped_files += 1;
            }
        }
        files.sort();
        counts.insert(class.clone(), files.len());
        entries.extend(files.into_iter().map(|f| (format!("{class}/{f}"), index)));
        classes.push(class);
    }
    if skipped_files > 0 {
        log::warn!(
            "ignored {skipped_files} non-image file(s) under {}",
            root.display()
        );
    }

    let total = entries.len();
    if total == 0 {
        return Err(Error::EmptyDataset(format!(
            "{} contains no images",
            root.display()
        )));
    }

    Ok(DatasetManifest {
        root_path: root.to_path_buf(),
        classes,
        entries,
        counts,
        total,
        skipped_files,
    })
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn absolute_path(&self, relative: &str) -> PathBuf {
        self.root_path.join(relative)
    }

    /// Checks the structural invariants; manifests read from disk may have
    /// been edited by hand.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("manifest: {msg}")));
        if self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("classes must be sorted and unique".into());
        }
        let mut seen = HashSet::with_capacity(self.entries.len());
        for (path, class) in &self.entries {
            if *class >= self.classes.len() {
                return bad(format!("entry {path} has class index {class}"));
            }
            if !seen.insert(path.as_str()) {
                return bad(format!("duplicate entry {path}"));
            }
        }
        let sum: usize = self.counts.values().sum();
        if sum != self.total || self.total != self.entries.len() {
            return bad(format!(
                "total {} disagrees with counts ({sum}) or entries ({})",
                self.total,
                self.entries.len()
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        let manifest: Self = serde_json::from_slice(&bytes)?;
        manifest.validate()?;
        Ok(manifest)
    }
}
