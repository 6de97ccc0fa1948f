//! Saliency maps: Grad-CAM, occlusion sensitivity, and heatmap overlays.

mod colormap;
mod export;
mod gradcam;
mod occlusion;
mod overlay;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use colormap::{jet_lut, Colormap};
pub use export::{encode_png, heatmap_to_gray, write_explanation, ExplanationSidecar};
pub use gradcam::{grad_cam, CamScore, LayerSelector};
pub use occlusion::{occlusion_map, occlusion_sensitivity, OcclusionGeometry};
pub use overlay::render_overlay;

use crate::error::{Error, Result};
use crate::model::{argmax, predict_batch, ImageClassifier};
use crate::dataset::PreprocessedImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationMethod {
    GradCam,
    Occlusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetClass {
    /// The model's top prediction.
    #[default]
    Auto,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// Values in `[0, 1]`, same height and width as the explained image.
    pub heatmap: Array2<f32>,
    pub target_class: usize,
    pub method: ExplanationMethod,
    /// Min and max of the map before normalization.
    pub raw_extent: (f32, f32),
    pub layer: Option<String>,
}

pub(crate) fn resolve_target<M: ImageClassifier + ?Sized>(
    model: &M,
    image: &PreprocessedImage,
    target: TargetClass,
) -> Result<usize> {
    let n = model.num_classes();
    match target {
        TargetClass::Index(c) if c < n => Ok(c),
        TargetClass::Index(c) => Err(Error::InvalidClass {
            class: c,
            num_classes: n,
        }),
        TargetClass::Auto => {
            let probs = predict_batch(model, std::slice::from_ref(image))?;
            Ok(argmax(probs.row(0).as_slice().expect("contiguous row")))
        }
    }
}

/// Min-max scaling to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize(map: &Array2<f32>) -> (Array2<f32>, (f32, f32)) {
    let min = map.iter().copied().fold(f32::INFINITY, f32::min);
    let max = map.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if map.is_empty() || max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return (Array2::zeros(map.raw_dim()), (min, max));
    }
    let range = max - min;
    (map.mapv(|v| (v - min) / range), (min, max))
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn bilinear_resize(map: &Array2<f32>, out_h: usize, out_w: usize) -> Array2<f32> {
    let (in_h, in_w) = map.dim();
    let coords = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        (0..out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).max(0.0);
                let lo = (s.floor() as usize).min(inp - 1);
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, (s - lo as f64).min(1.0) as f32)
            })
            .collect()
    };
    let ys = coords(out_h, in_h);
    let xs = coords(out_w, in_w);
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let top = map[[y0, x0]] * (1.0 - fx) + map[[y0, x1]] * fx;
        let bottom = map[[y1, x0]] * (1.0 - fx) + map[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}
