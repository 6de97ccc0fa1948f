use std::path::PathBuf;

use crate::dataset::PreprocessingMode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("path not found: {0}")]
    NotFound(PathBuf),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("cannot decode image {path}: {reason}")]
    Decode { path: String, reason: String },

    #[error("unsupported backbone: {0}")]
    UnsupportedBackbone(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("preprocessing mode mismatch: model expects {expected}, image is {found}")]
    ModeMismatch {
        expected: PreprocessingMode,
        found: PreprocessingMode,
    },

    #[error("epsilon must be a finite value >= 0, got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("class index {class} out of range for {num_classes} classes")]
    InvalidClass { class: usize, num_classes: usize },

    #[error("invalid occlusion geometry: {0}")]
    InvalidGeometry(String),

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("label lists differ in length: {y_true} true vs {y_pred} predicted")]
    LengthMismatch { y_true: usize, y_pred: usize },

    #[error("label {label} out of range for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    #[error("invalid confusion matrix: {0}")]
    InvalidMatrix(String),

    #[error("class order mismatch: model {model:?} vs dataset {dataset:?}")]
    ClassOrderMismatch {
        model: Vec<String>,
        dataset: Vec<String>,
    },

    #[error("training failed: {0}")]
    Training(String),

    #[error("model artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
