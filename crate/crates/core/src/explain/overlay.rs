use image::{Rgb, RgbImage};

use super::{Colormap, Explanation};
use crate::error::{Error, Result};

/// Blends the colorized heatmap over `original`:
/// `round((1 - alpha) * original + alpha * colormap(heat))` per channel.
pub fn render_overlay(
    explanation: &Explanation,
    original: &RgbImage,
    alpha: f64,
    colormap: Colormap,
) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let (h, w) = explanation.heatmap.dim();
    if (original.width() as usize, original.height() as usize) != (w, h) {
        return Err(Error::InvalidGeometry(format!(
            "heatmap is {h}x{w} but the image is {}x{}",
            original.height(),
            original.width()
        )));
    }
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let heat = colormap.map(explanation.heatmap[[y as usize, x as usize]]);
        let orig = original.get_pixel(x, y).0;
        let mut out = [0u8; 3];
        for c in 0..3 {
            let v = (1.0 - alpha) * orig[c] as f64 + alpha * heat[c] as f64;
            out[c] = v.round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    }))
}
