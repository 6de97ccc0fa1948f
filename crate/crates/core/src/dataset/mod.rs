//! Corpus inventory, stratified splitting and image preprocessing.

mod manifest;
mod preprocess;
mod split;

pub use manifest::{is_image_file, scan_dataset, DatasetManifest};
pub use preprocess::{
    decode_image, load_and_preprocess, preprocess_bytes, preprocess_image, resize_rgb,
    PreprocessedImage, PreprocessingMode, INPUT_SIZE,
};
pub use split::{stratified_split, SplitAssignment, SplitRatios, Subset};
