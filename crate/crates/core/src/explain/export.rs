use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Explanation, ExplanationMethod};
use crate::error::Result;

/// Metadata written next to exported heatmaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSidecar {
    pub method: ExplanationMethod,
    pub target_class: usize,
    pub target_name: Option<String>,
    pub raw_min: f32,
    pub raw_max: f32,
    pub layer: Option<String>,
}

impl ExplanationSidecar {
    pub fn new(explanation: &Explanation, class_names: &[String]) -> Self {
        Self {
            method: explanation.method,
            target_class: explanation.target_class,
            target_name: class_names.get(explanation.target_class).cloned(),
            raw_min: explanation.raw_extent.0,
            raw_max: explanation.raw_extent.1,
            layer: explanation.layer.clone(),
        }
    }
}

pub fn heatmap_to_gray(explanation: &Explanation) -> GrayImage {
    let (h, w) = explanation.heatmap.dim();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = explanation.heatmap[[y as usize, x as usize]];
        Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    })
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Writes `<stem>_heatmap.png`, `<stem>.json` and, when given,
/// `<stem>_overlay.png` into `dir`.
pub fn write_explanation(
    dir: impl AsRef<Path>,
    stem: &str,
    explanation: &Explanation,
    class_names: &[String],
    overlay: Option<&RgbImage>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    heatmap_to_gray(explanation).save(dir.join(format!("{stem}_heatmap.png")))?;
    if let Some(img) = overlay {
        img.save(dir.join(format!("{stem}_overlay.png")))?;
    }
    let sidecar = ExplanationSidecar::new(explanation, class_names);
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&sidecar)?,
    )?;
    Ok(())
}
