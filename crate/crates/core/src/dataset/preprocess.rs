use std::fmt;
use std::path::Path;

use image::imageops::FilterType;
use image::{DynamicImage, RgbImage};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial size every image is resized to before it reaches a model.
pub const INPUT_SIZE: u32 = 224;

/// How byte pixel values are mapped to model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessingMode {
    /// `v / 127.5 - 1`, range `[-1, 1]`. What both backbones expect.
    ScaleSymmetric,
    /// `v / 255`, range `[0, 1]`. The space adversarial budgets are measured in.
    ScaleUnit,
}

impl PreprocessingMode {
    pub fn value_range(self) -> (f32, f32) {
        match self {
            PreprocessingMode::ScaleSymmetric => (-1.0, 1.0),
            PreprocessingMode::ScaleUnit => (0.0, 1.0),
        }
    }

    pub fn scale_byte(self, v: u8) -> f32 {
        match self {
            PreprocessingMode::ScaleSymmetric => v as f32 / 127.5 - 1.0,
            PreprocessingMode::ScaleUnit => v as f32 / 255.0,
        }
    }

    /// Maps a `[0, 1]` value into this mode's range.
    pub fn from_unit(self, u: f32) -> f32 {
        match self {
            PreprocessingMode::ScaleSymmetric => u * 2.0 - 1.0,
            PreprocessingMode::ScaleUnit => u,
        }
    }

    /// Inverse of [`from_unit`](Self::from_unit).
    pub fn to_unit(self, v: f32) -> f32 {
        match self {
            PreprocessingMode::ScaleSymmetric => (v + 1.0) * 0.5,
            PreprocessingMode::ScaleUnit => v,
        }
    }

    pub fn to_byte(self, v: f32) -> u8 {
        (self.to_unit(v) * 255.0).round().clamp(0.0, 255.0) as u8
    }
}

impl fmt::Display for PreprocessingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreprocessingMode::ScaleSymmetric => "scale_symmetric",
            PreprocessingMode::ScaleUnit => "scale_unit",
        })
    }
}

/// A resized, scaled image laid out height x width x channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedImage {
    pub pixels: Array3<f32>,
    pub mode: PreprocessingMode,
    pub source_path: String,
}

impl PreprocessedImage {
    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn value_range(&self) -> (f32, f32) {
        self.mode.value_range()
    }

    /// Builds an image directly from HWC values, e.g. for synthetic inputs.
    pub fn from_array(pixels: Array3<f32>, mode: PreprocessingMode) -> Self {
        Self {
            pixels,
            mode,
            source_path: String::new(),
        }
    }

    /// Same image re-expressed in another mode.
    pub fn convert(&self, mode: PreprocessingMode) -> Self {
        if mode == self.mode {
            return self.clone();
        }
        let from = self.mode;
        Self {
            pixels: self.pixels.mapv(|v| mode.from_unit(from.to_unit(v))),
            mode,
            source_path: self.source_path.clone(),
        }
    }

    /// Back to 8-bit RGB (lossy for non-byte values).
    pub fn to_rgb(&self) -> RgbImage {
        let (h, w) = (self.height() as u32, self.width() as u32);
        RgbImage::from_fn(w, h, |x, y| {
            let px = |c| self.mode.to_byte(self.pixels[[y as usize, x as usize, c]]);
            image::Rgb([px(0), px(1), px(2)])
        })
    }
}

/// Bilinear resize to [`INPUT_SIZE`] and per-mode scaling.
pub fn preprocess_image(
    image: &DynamicImage,
    mode: PreprocessingMode,
    source: impl Into<String>,
) -> PreprocessedImage {
    let rgb = resize_rgb(image);
    let (w, h) = rgb.dimensions();
    let mut pixels = Array3::<f32>::zeros((h as usize, w as usize, 3));
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            pixels[[y as usize, x as usize, c]] = mode.scale_byte(px[c]);
        }
    }
    PreprocessedImage {
        pixels,
        mode,
        source_path: source.into(),
    }
}

/// RGB copy resized to the model input size; grayscale is replicated to three
/// channels and alpha is dropped.
pub fn resize_rgb(image: &DynamicImage) -> RgbImage {
    let rgb = image.to_rgb8();
    if rgb.dimensions() == (INPUT_SIZE, INPUT_SIZE) {
        return rgb;
    }
    image::imageops::resize(&rgb, INPUT_SIZE, INPUT_SIZE, FilterType::Triangle)
}

pub fn decode_image(bytes: &[u8], source: &str) -> Result<DynamicImage> {
    if bytes.is_empty() {
        return Err(Error::Decode {
            path: source.to_string(),
            reason: "empty file".into(),
        });
    }
    image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: source.to_string(),
        reason: e.to_string(),
    })
}

pub fn preprocess_bytes(
    bytes: &[u8],
    mode: PreprocessingMode,
    source: &str,
) -> Result<PreprocessedImage> {
    Ok(preprocess_image(&decode_image(bytes, source)?, mode, source))
}

pub fn load_and_preprocess(
    path: impl AsRef<Path>,
    mode: PreprocessingMode,
) -> Result<PreprocessedImage> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Decode {
            path: source.clone(),
            reason: e.to_string(),
        },
    })?;
    preprocess_bytes(&bytes, mode, &source)
}
