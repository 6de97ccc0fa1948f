use ndarray::{s, Array2};

use super::{bilinear_resize, normalize, resolve_target, Explanation, ExplanationMethod, TargetClass};
use crate::dataset::PreprocessedImage;
use crate::error::{Error, Result};
use crate::model::{predict_batch, ImageClassifier};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionGeometry {
    pub patch: usize,
    pub stride: usize,
    /// Fill value in `[0, 1]` pixel space.
    pub fill_unit: f32,
}

impl Default for OcclusionGeometry {
    fn default() -> Self {
        Self {
            patch: 32,
            stride: 16,
            fill_unit: 0.5,
        }
    }
}

impl OcclusionGeometry {
    /// Probe positions along an axis of length `size`.
    pub fn positions(&self, size: usize) -> usize {
        (size - self.patch) / self.stride + 1
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.patch == 0 || self.patch > h.min(w) {
            return Err(Error::InvalidGeometry(format!(
                "patch {} must be in 1..={}",
                self.patch,
                h.min(w)
            )));
        }
        if self.stride == 0 || self.stride > self.patch {
            return Err(Error::InvalidGeometry(format!(
                "stride {} must be in 1..={}",
                self.stride, self.patch
            )));
        }
        if !(0.0..=1.0).contains(&self.fill_unit) {
            return Err(Error::InvalidGeometry(format!(
                "fill {} is outside [0, 1]",
                self.fill_unit
            )));
        }
        Ok(())
    }
}

/// Probability drop for `target_class` at each probe position: entry
/// `(i, j)` occludes rows `i*stride..i*stride+patch` and the matching columns.
pub fn occlusion_map<M: ImageClassifier + ?Sized>(
    model: &M,
    image: &PreprocessedImage,
    target_class: usize,
    geometry: OcclusionGeometry,
) -> Result<Array2<f32>> {
    let (h, w) = (image.height(), image.width());
    geometry.validate(h, w)?;
    if target_class >= model.num_classes() {
        return Err(Error::InvalidClass {
            class: target_class,
            num_classes: model.num_classes(),
        });
    }
    let base = predict_batch(model, std::slice::from_ref(image))?[[0, target_class]];
    let fill = image.mode.from_unit(geometry.fill_unit);
    let (ny, nx) = (geometry.positions(h), geometry.positions(w));
    let mut map = Array2::zeros((ny, nx));
    let mut probe = image.clone();
    for i in 0..ny {
        for j in 0..nx {
            let (y0, x0) = (i * geometry.stride, j * geometry.stride);
            let window = s![y0..y0 + geometry.patch, x0..x0 + geometry.patch, ..];
            probe.pixels.slice_mut(window).fill(fill);
            let p = predict_batch(model, std::slice::from_ref(&probe))?[[0, target_class]];
            map[[i, j]] = base - p;
            probe.pixels.slice_mut(window).assign(&image.pixels.slice(window));
        }
    }
    Ok(map)
}

/// Occlusion sensitivity upsampled to the image size and min-max normalized.
pub fn occlusion_sensitivity<M: ImageClassifier + ?Sized>(
    model: &M,
    image: &PreprocessedImage,
    target: TargetClass,
    geometry: OcclusionGeometry,
) -> Result<Explanation> {
    geometry.validate(image.height(), image.width())?;
    let target_class = resolve_target(model, image, target)?;
    let raw = occlusion_map(model, image, target_class, geometry)?;
    let up = bilinear_resize(&raw, image.height(), image.width());
    let (heatmap, raw_extent) = normalize(&up);
    Ok(Explanation {
        heatmap,
        target_class,
        method: ExplanationMethod::Occlusion,
        raw_extent,
        layer: None,
    })
}
